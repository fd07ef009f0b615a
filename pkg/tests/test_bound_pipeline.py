import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ticklim import bound_pipeline as bp
from ticklim.clock_zoo import (
    ladder_clock,
    quasi_ideal_clock,
    random_diagonal_instrument,
    random_instrument,
)
from ticklim.errors import (
    BadParameter,
    CaseOne,
    DeltaBelowStep,
    NotIncoherent,
    RTooSmall,
)
from ticklim.generator import GeneratorModel, SharpnessStats, TickPdf, waiting_pdf
from ticklim.infotheory import TWO_PI_E


def stats(mu, sigma):
    return SharpnessStats(mu, sigma * sigma, mu * mu / (sigma * sigma))


def test_coarse_grain_worked_example():
    cg = bp.coarse_grain_params(stats(100.0, 10.0), 4, 0.0025)
    assert cg.delta_exact == pytest.approx(0.0025)
    assert cg.steps_per_delta == 1
    assert cg.delta == 0.0025
    assert cg.k_minus == 34343
    assert cg.k_plus == 45657
    assert cg.case == "ii"
    assert not cg.clamped


def test_coarse_grain_rounds_down_to_step_multiple():
    cg = bp.coarse_grain_params(stats(100.0, 10.0), 4, 0.001)
    assert cg.steps_per_delta == 2
    assert cg.delta == pytest.approx(0.002)
    assert cg.delta <= cg.delta_exact


def test_coarse_grain_case_ii_below_step():
    with pytest.raises(DeltaBelowStep):
        bp.coarse_grain_params(stats(100.0, 10.0), 4, 0.01)


def test_coarse_grain_case_i_clamps():
    cg = bp.coarse_grain_params(stats(10.0, 5.0), 4, 1.0)
    assert cg.case == "i"
    assert cg.clamped
    assert cg.steps_per_delta == 1
    assert cg.delta_exact == pytest.approx(10 / (16 * 4))


def test_coarse_grain_parameter_checks():
    with pytest.raises(BadParameter):
        bp.coarse_grain_params(stats(1.0, 1.0), 0, 1.0)
    with pytest.raises(BadParameter):
        bp.coarse_grain_params(stats(1.0, 1.0), 4, 0.0)


def test_coarse_pdf_geometric():
    q, m = 0.01, 7
    k = np.arange(1, 3001)
    p = q * (1 - q) ** (k - 1)
    fine = TickPdf(p, 1.0, tail=(1 - q) ** 3000, tail_rate=1 - q)
    cg = bp.CoarseGraining(7.0, m, 1, 2, 7.0, "i", False)
    coarse = bp.coarse_pdf(fine, cg)
    s = np.arange(1, coarse.k_max + 1)
    ref = (1 - q) ** ((s - 1) * m) * (1 - (1 - q) ** m)
    assert np.max(np.abs(coarse.probs - ref)) < 1e-15
    assert coarse.step == 7.0
    assert coarse.tail_rate == pytest.approx((1 - q) ** m)
    assert coarse.probs.sum() + coarse.tail == pytest.approx(1.0, abs=1e-14)


def test_coarse_pdf_matches_resimulation_with_block_map():
    m = 10
    model = ladder_clock(3, 0.05)
    pdf = waiting_pdf(model, tail_eps=1e-13)
    cg = bp.CoarseGraining(10.0, m, 1, 2, 10.0, "i", False)
    coarse = bp.coarse_pdf(pdf, cg)
    # survival at multiples of m from the m-th power of the no-tick superoperator
    s10 = np.linalg.matrix_power(model.instrument.no_tick_superop(), m)
    r = np.asarray(model.rho0).reshape(-1)
    surv = []
    for _ in range(coarse.k_max + 1):
        surv.append(np.trace(r.reshape(3, 3)).real)
        r = s10 @ r
    ref = -np.diff(surv)
    assert np.max(np.abs(coarse.probs - ref)) < 1e-13


def test_coarse_pdf_identity_for_unit_bins():
    pdf = waiting_pdf(ladder_clock(2, 0.2))
    cg = bp.CoarseGraining(1.0, 1, 1, 2, 1.0, "i", True)
    assert bp.coarse_pdf(pdf, cg) is pdf


def test_error_term_values():
    assert bp.eps_tilde(4) == pytest.approx(1.031496062992126, rel=1e-14)
    terms = bp.error_terms(4, 8.0, 100.0, 10.0, 0.01)
    assert terms.eps_d == pytest.approx(42.0158875236681, rel=1e-13)
    with pytest.raises(BadParameter):
        bp.error_terms(3, 8.0, 100.0, 10.0, 0.01)


def test_error_terms_decay_with_dimension():
    dims = [4, 16, 64, 256]
    et = [bp.eps_tilde(d) for d in dims]
    ed = [bp._eps_d(d) for d in dims]
    assert all(a > b for a, b in zip(et, et[1:]))
    assert all(a > b for a, b in zip(ed, ed[1:]))
    assert all(bp.eps_tilde(d) <= 3 * d**-0.5 for d in dims[1:])


@settings(max_examples=200, deadline=None)
@given(d=st.integers(4, 10_000), excess=st.floats(1.0, 1e4), mu=st.floats(1e-3, 1e6))
def test_e_factor_below_one_plus_eps_tilde(d, excess, mu):
    # substituting sigma = mu/sqrt(R), Delta = mu/(R^2 d) with R >= d^{3/2}
    R = d**1.5 * excess
    sigma = mu / math.sqrt(R)
    delta = mu / (R * R * d)
    E = bp.e_factor(d, delta, mu, sigma)
    closed = (1 + d**-0.25 * R**-1.5 / d) / (1 - d**0.25 / math.sqrt(R) - 1 / (R * R * d))
    assert E == pytest.approx(closed, rel=1e-12)
    assert E <= 1 + bp.eps_tilde(d) + 1e-12


def test_explicit_bound_rhs_values():
    assert bp.explicit_bound_rhs(64.0, 16) == pytest.approx(-31.455421195816146, rel=1e-13)
    assert bp.explicit_bound_rhs(TWO_PI_E * 1e6, 1000) == pytest.approx(-4.1953245728370789, rel=1e-13)
    with pytest.raises(BadParameter):
        bp.explicit_bound_rhs(64.0, 3)


def test_explicit_bound_ceiling():
    assert bp.explicit_bound_ceiling(16) == math.inf
    assert bp.explicit_bound_ceiling(900) == math.inf
    assert bp.explicit_bound_ceiling(901) == math.inf
    assert bp.explicit_bound_ceiling(10_000) == pytest.approx(147832312969865.3, rel=1e-12)
    # at the ceiling the bound is tight
    R = bp.explicit_bound_ceiling(10_000)
    assert bp.explicit_bound_rhs(R, 10_000) == pytest.approx(math.log2(10_000), rel=1e-12)


def test_qubits_needed():
    assert bp.qubits_needed(1e20) == pytest.approx(31.172185363692982, rel=1e-14)
    assert bp.qubits_needed(TWO_PI_E) == 0.0
    with pytest.raises(RTooSmall):
        bp.qubits_needed(10.0)


def test_check_margins():
    c = bp.Check("x", 1.0, 2.0, "<=")
    assert c.margin == 1.0 and c.passed
    c = bp.Check("x", 1.0, 2.0, ">=")
    assert c.margin == -1.0 and not c.passed
    assert bp.Check("x", 1.0, 1.0 - 1e-9, "<=").passed
    c = bp.Check("x", 5.0, math.inf, "<=")
    assert c.to_dict() == {"name": "x", "lhs": 5.0, "rhs": None, "margin": None, "pass": True}


def test_snapshot_holevo_chunking():
    m = random_instrument(3, 0.05, seed=2)
    a, ca = bp.snapshot_holevo(m, 50, 2, chunk=7)
    b, cb = bp.snapshot_holevo(m, 50, 2, chunk=2048)
    assert a == pytest.approx(b, abs=1e-13)
    assert ca == pytest.approx(cb, rel=1e-14)


@pytest.mark.parametrize("d", range(2, 17))
def test_incoherent_ceiling_ladders(d):
    for q in (0.01, 0.2, 0.5):
        assert bp.incoherent_check(ladder_clock(d, q)).passed


def test_incoherent_ceiling_random_chains():
    for seed in range(60):
        for q_max in (0.05, 0.5, 1.0):
            m = random_diagonal_instrument(1 + seed % 7, seed, q_max)
            assert bp.incoherent_check(m).passed


def test_incoherent_check_rejects_coherent_models():
    with pytest.raises(NotIncoherent):
        bp.incoherent_check(quasi_ideal_clock(8, 1.0, 4.0))
    m = ladder_clock(2, 0.1)
    with pytest.raises(NotIncoherent):
        bp.incoherent_check(GeneratorModel(m.instrument, np.full((2, 2), 0.5)))


def test_verify_chain_ladder_case_i():
    rep = bp.verify_chain(ladder_clock(5, 0.05))
    assert rep.case == "i"
    assert rep.passed
    assert rep.failures() == []
    assert rep.cg.clamped
    assert rep.check("holevo_vs_tick_information").lhs >= rep.I_CT
    assert rep.I_CS <= math.log2(5)
    with pytest.raises(KeyError):
        rep.check("nope")


def test_verify_chain_fine_step_bins():
    rep = bp.verify_chain(ladder_clock(4, 0.01, delta=1e-3))
    assert rep.cg.steps_per_delta == 6
    assert rep.passed


def test_verify_chain_report_json():
    rep = bp.verify_chain(ladder_clock(4, 0.1))
    data = json.loads(rep.to_json())
    for key in ("d", "R", "mu", "sigma2", "delta", "k_minus", "k_plus", "I_CS_bits",
                "I_CT_bits", "checks", "case", "pass"):
        assert key in data
    assert data["pass"] is True
    assert data["R"] == pytest.approx(4 / 0.9, rel=1e-8)
    assert all({"name", "lhs", "rhs", "margin", "pass"} <= set(c) for c in data["checks"])


def test_verify_chain_argument_errors():
    with pytest.raises(BadParameter):
        bp.verify_chain(ladder_clock(3, 0.1))
    with pytest.raises(CaseOne):
        bp.verify_chain(ladder_clock(4, 0.1), strict_case_one=True)
