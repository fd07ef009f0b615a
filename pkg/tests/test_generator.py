import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from ticklim import generator as gen
from ticklim.clock_zoo import ladder_clock, poisson_clock, random_instrument
from ticklim.errors import (
    BadParameter,
    DegenerateDistribution,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidInstrument,
    NonSingleton,
    NotDensity,
    StepTooLarge,
    TailTooHeavy,
)


def ladder_oracle(d, q, n):
    # negative binomial: failures before d successes, shifted by d
    k = np.arange(1, n + 1)
    return scipy.stats.nbinom.pmf(k - d, d, q)


def test_instrument_validation():
    m = ladder_clock(3, 0.2)
    assert gen.validate(m.instrument) < 1e-14
    bad = gen.QuantumInstrument.from_kraus([0.9 * np.eye(2)], [np.zeros((2, 2))])
    with pytest.raises(InvalidInstrument):
        gen.require_valid(bad)


def test_instrument_shape_errors():
    with pytest.raises(DimensionMismatch):
        gen.QuantumInstrument.from_kraus([np.eye(2)], [np.eye(3)])
    with pytest.raises(BadParameter):
        gen.QuantumInstrument.from_kraus([np.eye(2)], [np.zeros((2, 2))], step=0.0)


def test_model_rejects_bad_state():
    inst = ladder_clock(2, 0.1).instrument
    with pytest.raises(NotDensity):
        gen.GeneratorModel(inst, np.diag([0.5, 0.6]))
    with pytest.raises(DimensionMismatch):
        gen.GeneratorModel(inst, np.eye(3) / 3)


def test_superop_matches_maps():
    m = random_instrument(3, 0.2, seed=4)
    inst = m.instrument
    rho = np.asarray(m.rho0)
    for superop, apply in ((inst.no_tick_superop(), inst.no_tick_map), (inst.tick_superop(), inst.tick_map)):
        assert np.allclose((superop @ rho.reshape(-1)).reshape(3, 3), apply(rho), atol=1e-14)


def test_from_lindblad_vacuum_limit():
    gamma, delta = 2.0, 1e-3
    inst = gen.from_lindblad(np.zeros((1, 1)), [math.sqrt(gamma) * np.eye(1)], delta=delta)
    assert gen.validate(inst) < 1e-14
    pdf = gen.waiting_pdf(gen.GeneratorModel(inst, np.eye(1)))
    s = gen.sharpness(pdf)
    # exact geometric with q = gamma*delta; continuum limit is exponential(gamma)
    q = gamma * delta
    assert s.mu == pytest.approx(delta / q, rel=1e-9)
    assert s.sigma2 == pytest.approx(delta**2 * (1 - q) / q**2, rel=1e-8)
    assert abs(s.mu - 1 / gamma) < 1e-12


def test_from_lindblad_rejects_large_step():
    with pytest.raises(StepTooLarge):
        gen.from_lindblad(np.diag([0.0, 10.0]), [np.eye(2)], delta=0.05)


def test_from_lindblad_completion_is_trace_preserving():
    rng = np.random.default_rng(2)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    H = (g + g.conj().T) / 2
    V = rng.normal(size=(4, 4)) * 0.3
    inst = gen.from_lindblad(H, [V], [V.T], delta=1e-3)
    assert gen.validate(inst) < 1e-12


@pytest.mark.parametrize("d,q", [(1, 0.3), (2, 0.25), (4, 0.1), (6, 0.5)])
def test_ladder_pdf_is_negative_binomial(d, q):
    pdf = gen.waiting_pdf(ladder_clock(d, q))
    ref = ladder_oracle(d, q, pdf.k_max)
    assert np.max(np.abs(pdf.probs - ref)) < 1e-13
    s = gen.sharpness(pdf)
    assert s.mu == pytest.approx(d / q, rel=1e-9)
    assert s.R == pytest.approx(d / (1 - q), rel=1e-8)


def test_pdf_mass_and_survival():
    pdf = gen.waiting_pdf(ladder_clock(3, 0.05), tail_eps=1e-10)
    P = pdf.survival()
    assert P[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(P) <= 1e-16)
    assert pdf.probs.sum() + pdf.tail == pytest.approx(1.0, abs=1e-12)
    assert 0 < pdf.tail_rate < 1
    # window ratio of the exact survival over the last 256 steps
    K = pdf.k_max
    sf = scipy.stats.nbinom.sf
    ref = (sf(K - 3, 3, 0.05) / sf(K - 256 - 3, 3, 0.05)) ** (1 / 256)
    assert pdf.tail_rate == pytest.approx(ref, rel=1e-9)
    assert pdf.tail_rate > 0.95


def test_survival_curve_matches_pdf():
    m = ladder_clock(4, 0.1)
    pdf = gen.waiting_pdf(m)
    P = gen.survival_curve(m, 300)
    assert np.allclose(P, pdf.survival()[:301], atol=1e-14)


def test_waiting_pdf_rejects_bad_tail():
    with pytest.raises(BadParameter):
        gen.waiting_pdf(ladder_clock(2, 0.1), tail_eps=0.1)


def test_never_ticking_generator():
    inst = gen.QuantumInstrument.from_kraus([np.eye(2)], [np.zeros((2, 2))])
    with pytest.raises(NonSingleton):
        gen.waiting_pdf(gen.GeneratorModel(inst, np.diag([1.0, 0.0])))


def test_k_max_exceeded():
    with pytest.raises(NonSingleton):
        gen.waiting_pdf(ladder_clock(2, 0.001), k_max=1000)


def test_deterministic_tick_is_degenerate():
    inst = gen.QuantumInstrument.from_kraus([np.zeros((1, 1))], [np.eye(1)])
    pdf = gen.waiting_pdf(gen.GeneratorModel(inst, np.eye(1)))
    assert pdf.probs[0] == pytest.approx(1.0)
    with pytest.raises(DegenerateDistribution):
        gen.sharpness(pdf)


def test_sharpness_rejects_heavy_tail():
    pdf = gen.TickPdf(np.array([0.5, 0.4]), 1.0, tail=0.1, tail_rate=0.5)
    with pytest.raises(TailTooHeavy):
        gen.sharpness(pdf)


def test_tail_moments_complete_geometric():
    # truncate a geometric pdf early; the tail correction must restore the exact moments
    q = 0.2
    k = np.arange(1, 21)
    p = q * (1 - q) ** (k - 1)
    pdf = gen.TickPdf(p, 1.0, tail=(1 - q) ** 20, tail_rate=1 - q)
    t1, t2 = gen._tail_moments(pdf)
    assert np.dot(k, p) + t1 == pytest.approx(1 / q, rel=1e-12)
    assert np.dot(k * k, p) + t2 == pytest.approx((2 - q) / q**2, rel=1e-12)


def test_conditional_trajectory_matches_markov_recursion():
    d, q = 3, 0.2
    ens = gen.conditional_trajectory(ladder_clock(d, q), 40, stride=2)
    # classical populations under the no-tick map
    T = (1 - q) * np.eye(d)
    for i in range(d - 1):
        T[i + 1, i] = q
    v = np.zeros(d)
    v[0] = 1.0
    for k in range(41):
        assert ens.survival[k] == pytest.approx(v.sum(), rel=1e-12)
        assert np.allclose(np.diagonal(ens.states[k]).real, v / v.sum(), atol=1e-13)
        v = T @ T @ v
    assert ens.weights.sum() == pytest.approx(1.0)
    assert ens.normalizer == pytest.approx(1 / ens.survival.sum())
    assert not ens.truncated


def test_conditional_trajectory_truncates():
    ens = gen.conditional_trajectory(ladder_clock(1, 0.5), 100)
    assert ens.truncated
    assert len(ens) < 101
    assert ens.survival[-1] >= 1e-14


def test_ensemble_head():
    ens = gen.conditional_trajectory(ladder_clock(2, 0.1), 10)
    h = ens.head(4)
    assert len(h) == 4
    assert h.weights.sum() == pytest.approx(1.0)
    with pytest.raises(IndexOutOfRange):
        ens.head(0)


@settings(max_examples=20, deadline=None)
@given(d=st.integers(2, 6), seed=st.integers(0, 10_000), k=st.integers(1, 15))
def test_shift_identity(d, seed, k):
    m = random_instrument(d, 0.2, seed)
    pdf = gen.waiting_pdf(m)
    P = pdf.survival()
    shifted = gen.shift_pdf(pdf, P, k)
    inst = m.instrument
    rho = np.asarray(m.rho0)
    for _ in range(k):
        rho = inst.no_tick_map(rho)
    rho = rho / np.trace(rho).real
    direct = gen.waiting_pdf(gen.GeneratorModel(inst, 0.5 * (rho + rho.conj().T)))
    n = min(direct.k_max, shifted.k_max)
    assert np.max(np.abs(direct.probs[:n] - shifted.probs[:n])) < 1e-10


def test_shift_out_of_range():
    pdf = gen.waiting_pdf(ladder_clock(2, 0.3))
    P = pdf.survival()
    assert gen.shift_pdf(pdf, P, 0) is pdf
    with pytest.raises(IndexOutOfRange):
        gen.shift_pdf(pdf, P, len(P))


def test_singletonize_keeps_first_tick():
    m = random_instrument(3, 0.15, seed=9)
    s = gen.singletonize(m)
    assert s.dim == 4
    assert gen.validate(s.instrument) < 1e-12
    a, b = gen.waiting_pdf(m), gen.waiting_pdf(s)
    n = min(a.k_max, b.k_max)
    assert np.max(np.abs(a.probs[:n] - b.probs[:n])) < 1e-13
    assert gen.multi_tick_probability(s, 200) < 1e-15
    assert gen.multi_tick_probability(m, 200) > 0.1


def test_multi_tick_probability_ladder():
    # d=1 ladder: at least two ticks in n steps is 1 - (1-q)^n - n q (1-q)^(n-1)
    q, n = 0.1, 30
    ref = 1 - (1 - q) ** n - n * q * (1 - q) ** (n - 1)
    assert gen.multi_tick_probability(ladder_clock(1, q), n) == pytest.approx(ref, rel=1e-12)


def test_reset_concatenate_erlang():
    two = gen.waiting_pdf(ladder_clock(2, 0.25), tail_eps=1e-14)
    four = gen.reset_concatenate(two, 2)
    ref = ladder_oracle(4, 0.25, four.k_max)
    assert np.max(np.abs(four.probs - ref)) < 1e-13
    assert gen.reset_concatenate(two, 1) is two
    with pytest.raises(BadParameter):
        gen.reset_concatenate(two, 0)


def test_json_round_trip(tmp_path):
    m = random_instrument(3, 0.2, seed=1)
    path = tmp_path / "model.json"
    gen.save_model(m, path)
    back = gen.load_model(path)
    assert np.array_equal(back.instrument.no_tick_kraus, m.instrument.no_tick_kraus)
    assert np.array_equal(back.instrument.tick_kraus, m.instrument.tick_kraus)
    assert np.array_equal(back.rho0, m.rho0)
    assert back.step == m.step


def test_json_malformed():
    with pytest.raises(InvalidInstrument):
        gen.model_from_dict({"dim": 2})
    d = gen.model_to_dict(poisson_clock(1.0, 1e-3))
    d["tick_kraus"] = [[[[0.5, 0.0]]]]
    with pytest.raises(InvalidInstrument):
        gen.model_from_dict(d)
