import numpy as np
import pytest

from ticklim import clock_zoo as zoo
from ticklim.errors import BadParameter, StepTooLarge
from ticklim.generator import sharpness, validate, waiting_pdf


def test_poisson_clock():
    m = zoo.poisson_clock(2.0, 1e-3)
    s = sharpness(waiting_pdf(m))
    q = 2e-3
    assert s.mu == pytest.approx(1e-3 / q, rel=1e-9)
    assert s.R == pytest.approx(1 / (1 - q), rel=1e-8)


def test_poisson_rejects_coarse_step():
    with pytest.raises(StepTooLarge):
        zoo.poisson_clock(200.0, 1e-3)
    with pytest.raises(BadParameter):
        zoo.poisson_clock(-1.0, 1e-3)


@pytest.mark.parametrize("d,q", [(2, 0.5), (5, 0.2), (10, 0.05)])
def test_ladder_sharpness(d, q):
    s = sharpness(waiting_pdf(zoo.ladder_clock(d, q)))
    assert s.R == pytest.approx(d / (1 - q), rel=1e-8)


def test_single_rung_ladder_is_poisson():
    a = waiting_pdf(zoo.ladder_clock(1, 0.02, delta=0.1))
    b = waiting_pdf(zoo.poisson_clock(0.2, 0.1))
    n = min(a.k_max, b.k_max)
    assert np.max(np.abs(a.probs[:n] - b.probs[:n])) < 1e-15


def test_ladder_parameter_checks():
    for args in [(0, 0.1), (2.5, 0.1), (3, 0.0), (3, 0.6)]:
        with pytest.raises(BadParameter):
            zoo.ladder_clock(*args)


def test_time_basis_is_unitary():
    u = zoo.time_basis(7)
    assert np.allclose(u.conj().T @ u, np.eye(7), atol=1e-13)


def test_quasi_ideal_state_normalised_and_localised():
    d = 16
    psi = zoo.quasi_ideal_state(d, 1.5, 5.0)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    amps = np.abs(zoo.time_basis(d).conj().T @ psi) ** 2
    assert int(np.argmax(amps)) == 5


def test_quasi_ideal_clock_valid():
    for d in (4, 8, 16):
        m = zoo.quasi_ideal_clock(d, 1.0, 4.0, travel=0.8)
        assert validate(m.instrument) < 1e-12
        assert abs(np.trace(m.rho0) - 1) < 1e-12


def test_quasi_ideal_beats_classical_ladder_at_d16():
    s = sharpness(waiting_pdf(zoo.quasi_ideal_clock(16, 1.0, 4.0, travel=0.8)))
    assert s.R > 16 / (1 - 0.5)


def test_quasi_ideal_parameter_checks():
    with pytest.raises(BadParameter):
        zoo.quasi_ideal_clock(3, 1.0, 1.0)
    with pytest.raises(BadParameter):
        zoo.quasi_ideal_clock(16, 5.0, 1.0)
    with pytest.raises(BadParameter):
        zoo.quasi_ideal_clock(16, 1.0, 1.0, travel=1.0)
    with pytest.raises(StepTooLarge):
        zoo.quasi_ideal_clock(8, 1.0, 4.0, delta=0.05)


def test_random_instrument_deterministic():
    a = zoo.random_instrument(4, 0.1, seed=7)
    b = zoo.random_instrument(4, 0.1, seed=7)
    c = zoo.random_instrument(4, 0.1, seed=8)
    assert np.array_equal(a.instrument.tick_kraus, b.instrument.tick_kraus)
    assert np.array_equal(a.rho0, b.rho0)
    assert not np.array_equal(a.instrument.tick_kraus, c.instrument.tick_kraus)


def test_random_instruments_valid():
    rng = np.random.default_rng(0)
    worst = 0.0
    for seed in range(500):
        d = int(rng.integers(1, 9))
        w = float(rng.uniform(0.01, 0.9))
        worst = max(worst, validate(zoo.random_instrument(d, w, seed).instrument))
    assert worst < 1e-12


def test_random_instrument_tick_rate_window():
    # per-step tick probability from any state lies in [w, 2w]
    w = 0.1
    m = zoo.random_instrument(5, w, seed=3)
    ev = np.linalg.eigvalsh(m.instrument.tick_effect())
    assert ev.min() >= w - 1e-12
    assert ev.max() <= 2 * w + 1e-12


def test_random_instrument_mean_grows_as_weight_shrinks():
    mus = [sharpness(waiting_pdf(zoo.random_instrument(3, w, seed=2))).mu for w in (0.2, 0.02, 0.002)]
    assert mus[0] < mus[1] < mus[2]
    assert mus[2] > 1 / (2 * 0.002) - 1e-6


def test_random_diagonal_instrument_is_classical():
    m = zoo.random_diagonal_instrument(5, seed=1, q_max=0.3)
    assert validate(m.instrument) < 1e-12
    for k in list(m.instrument.no_tick_kraus) + list(m.instrument.tick_kraus):
        assert np.count_nonzero(k) <= 1
    assert np.count_nonzero(m.rho0 - np.diag(np.diagonal(m.rho0))) == 0


def test_families_registry():
    assert set(zoo.FAMILIES) == {"poisson", "ladder", "quasi-ideal", "random"}
    m = zoo.FAMILIES["ladder"](4, 0.3)
    assert sharpness(waiting_pdf(m)).R == pytest.approx(4 / 0.7, rel=1e-8)
    m = zoo.FAMILIES["quasi-ideal"](8, travel=0.6)
    assert m.dim == 8


def test_make_rng_reproducible():
    assert np.array_equal(zoo.make_rng(5).random(4), zoo.make_rng(5).random(4))


def test_random_lindblad_clock():
    a = zoo.random_lindblad_clock(4, seed=11)
    b = zoo.random_lindblad_clock(4, seed=11)
    assert validate(a.instrument) < 1e-12
    assert np.array_equal(a.instrument.no_tick_kraus, b.instrument.no_tick_kraus)
    # halving the step leaves the continuous-time mean nearly unchanged
    fine = zoo.random_lindblad_clock(4, seed=11, delta=a.step / 2)
    mu_a = sharpness(waiting_pdf(a)).mu
    mu_f = sharpness(waiting_pdf(fine)).mu
    assert mu_f == pytest.approx(mu_a, rel=0.02)
    with pytest.raises(BadParameter):
        zoo.random_lindblad_clock(1, seed=0)
