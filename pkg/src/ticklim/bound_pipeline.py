"""Numerical replay of the sharpness-bound proof chain.

Given a generator, ``verify_chain`` coarse-grains its first-tick distribution,
builds the snapshot ensemble and evaluates every inequality of the argument
``log d >= I(C:S) >= I(C:T) = H(<p_k>) - <H(p_k)>`` with explicit margins.
First-tick statistics do not change under singletonization, so any model is
accepted as is.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import infotheory as it
from . import numerics as nx
from .errors import (
    BadParameter,
    CaseOne,
    DeltaBelowStep,
    NotIncoherent,
    RTooSmall,
)
from .generator import (
    DEFAULT_KMAX,
    GeneratorModel,
    SharpnessStats,
    SnapshotEnsemble,
    TickPdf,
    sharpness,
    waiting_pdf,
)
from .infotheory import LOG2E, TWO_PI_E, zeta
from .numerics import TOL

__all__ = [
    "BoundReport",
    "Check",
    "CoarseGraining",
    "ErrorTerms",
    "SnapshotEnsemble",
    "coarse_grain_params",
    "coarse_pdf",
    "error_terms",
    "explicit_bound_ceiling",
    "explicit_bound_rhs",
    "incoherent_check",
    "qubits_needed",
    "snapshot_holevo",
    "verify_chain",
]

MARGIN_TOL = TOL.margin_bits


@dataclass(frozen=True)
class CoarseGraining:
    """Bin width ``delta = steps_per_delta * step`` and the Chebyshev window ``[K-, K+]``.

    ``delta_exact`` is ``mu/(R^2 d)`` before rounding down to the step grid.
    """

    delta: float
    steps_per_delta: int
    k_minus: int
    k_plus: int
    delta_exact: float
    case: str
    clamped: bool = False


def coarse_grain_params(stats: SharpnessStats, d: int, step: float) -> CoarseGraining:
    """Coarse-graining of the proof for a distribution with the given moments.

    The exact width is rounded down to a multiple of ``step`` so that the
    scaling relations ``sigma/Delta >= d^{13/4}`` survive rounding.  In the
    full case (``R >= d^{3/2}``) a width below one step raises
    ``DeltaBelowStep``; in the trivial case it is clamped to one step and
    flagged.
    """
    if d < 1:
        raise BadParameter("d must be positive")
    if not step > 0:
        raise BadParameter("step must be positive")
    mu, sigma, R = stats.mu, stats.sigma, stats.R
    exact = mu / (R * R * d)
    case = "ii" if R >= d**1.5 else "i"
    m = math.floor(exact / step * (1 + 1e-12))
    clamped = False
    if m < 1:
        if case == "ii":
            raise DeltaBelowStep(
                f"Delta = {exact:.6g} is below the step {step:.6g}; re-simulate with a finer step"
            )
        m, clamped = 1, True
    delta = m * step
    a = d**0.25 * sigma
    k_minus = math.floor((mu - a) / delta)
    k_plus = math.ceil((mu + a) / delta)
    return CoarseGraining(delta, m, k_minus, k_plus, exact, case, clamped)


def coarse_pdf(pdf: TickPdf, cg: CoarseGraining) -> TickPdf:
    """Bin a fine pdf into windows of ``steps_per_delta`` steps.

    Bin ``s`` collects fine steps ``(s-1)m+1 .. sm``; the geometric tail is
    carried over with rate ``r^m``.
    """
    m = cg.steps_per_delta
    if m < 1:
        raise BadParameter("steps_per_delta must be >= 1")
    if m == 1:
        return pdf
    p = np.asarray(pdf.probs)
    n = -(-len(p) // m)
    padded = np.zeros(n * m)
    padded[: len(p)] = p
    # leftover tail mass inside the last partial bin
    tail = pdf.tail
    short = n * m - len(p)
    if short and tail > 0:
        r = pdf.tail_rate
        fill = tail * (1 - r) * r ** np.arange(short)
        padded[len(p):] = fill
        tail = tail - fill.sum()
    binned = padded.reshape(n, m).sum(axis=1)
    return TickPdf(binned, pdf.step * m, max(tail, 0.0), pdf.tail_rate**m)


# ------------------------------------------------------------ error terms


@dataclass(frozen=True)
class ErrorTerms:
    eps_d: float
    eps_tilde_d: float
    eta_tilde: float
    E_factor: float


def _eps_d(d: float) -> float:
    body = 8 * math.log2(d) + 2.5 * LOG2E + 16 * math.log2(TWO_PI_E)
    return d**-0.5 * body - 12 * LOG2E * d**-2.5 - 2 * zeta(d**3.25 / 2)


def eps_tilde(d: float) -> float:
    return (d**-3.5 + d**-0.5 + d**-4) / (1 - d**-0.5 - d**-4)


def e_factor(d: float, delta: float, mu: float, sigma: float) -> float:
    return (1 + d**-0.25 * delta / sigma) / (1 - d**0.25 * sigma / mu - delta / mu)


def error_terms(d: int, R: float, mu: float, sigma: float, delta: float) -> ErrorTerms:
    if d < 4:
        raise BadParameter("error terms need d >= 4")
    et = eps_tilde(d)
    eta = d**-0.5 * LOG2E * (1 + et) + d**-0.5 * (5 + 2 * et) * math.log2(mu / delta)
    return ErrorTerms(_eps_d(d), et, eta, e_factor(d, delta, mu, sigma))


def eta_ceiling(d: float, R: float) -> float:
    return d**-0.5 * (8 * (2 * math.log2(R) + math.log2(d)) + 2.5 * LOG2E)


def explicit_bound_rhs(R: float, d: int) -> float:
    """Right-hand side of the explicit dimension bound, in bits."""
    if d < 4:
        raise BadParameter("explicit bound needs d >= 4")
    return (1 - 30 * d**-0.5) * 0.5 * math.log2(R / TWO_PI_E) - _eps_d(d)


def explicit_bound_ceiling(d: int) -> float:
    """Largest R compatible with the explicit bound.

    ``inf`` while the prefactor ``1 - 30/sqrt(d)`` is <= 0, and also when the
    ceiling would overflow a double (exponent above 1000 bits).
    """
    a = 1 - 30 * d**-0.5
    if a <= 0:
        return math.inf
    expo = 2 * (math.log2(d) + _eps_d(d)) / a
    if expo > 1000:
        return math.inf
    return TWO_PI_E * 2.0**expo


def qubits_needed(R: float) -> float:
    """Qubits a fully controlled generator needs to reach sharpness ``R``."""
    if not R >= TWO_PI_E:
        raise RTooSmall(f"R must be at least 2*pi*e = {TWO_PI_E:.6f}, got {R}")
    return math.log2(math.sqrt(R / TWO_PI_E))


# ----------------------------------------------------------------- report


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    sense: str  # "<=" or ">="

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs if self.sense == "<=" else self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -MARGIN_TOL)

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
                "margin": _num(self.margin), "pass": self.passed}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class BoundReport:
    d: int
    stats: SharpnessStats
    cg: CoarseGraining
    I_CS: float | None
    I_CT: float | None
    chebyshev_mass: float | None
    errors: ErrorTerms | None
    checks: list[Check] = field(default_factory=list)
    k_ensemble: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def R(self) -> float:
        return self.stats.R

    @property
    def case(self) -> str:
        return self.cg.case

    @property
    def passed(self) -> bool:
        return bool(all(c.passed for c in self.checks))

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "R": _num(self.R),
            "mu": _num(self.stats.mu),
            "sigma2": _num(self.stats.sigma2),
            "delta": _num(self.cg.delta),
            "k_minus": self.cg.k_minus,
            "k_plus": self.cg.k_plus,
            "I_CS_bits": None if self.I_CS is None else _num(self.I_CS),
            "I_CT_bits": None if self.I_CT is None else _num(self.I_CT),
            "checks": [c.to_dict() for c in self.checks],
            "case": self.case,
            "pass": self.passed,
            "notes": list(self.notes),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


# ------------------------------------------------------------- the chain


def snapshot_holevo(model: GeneratorModel, n_states: int, stride: int,
                    chunk: int = 2048) -> tuple[float, float]:
    """Holevo information of ``sum_k P~(k)|k><k| (x) rho_k`` over ``k < n_states``.

    States are propagated ``stride`` steps at a time and diagonalised in
    chunks, so memory stays bounded for long ensembles.  Returns
    ``(I(C:S), normaliser C)``.
    """
    inst = model.instrument
    d = inst.dim
    sm = np.linalg.matrix_power(inst.no_tick_superop(), stride)
    r = np.asarray(model.rho0, dtype=complex).reshape(-1).copy()
    acc = np.zeros(d * d, dtype=complex)
    total = 0.0
    weighted_h = 0.0
    buf = np.empty((min(chunk, n_states), d, d), dtype=complex)
    surv = np.empty(len(buf))
    filled = 0

    def flush(k):
        nonlocal weighted_h
        rho = buf[:k] / surv[:k, None, None]
        rho = 0.5 * (rho + nx.dagger(rho))
        h = it.von_neumann_entropies(rho)
        weighted_h += float(np.dot(surv[:k], h))

    for _ in range(n_states):
        m = r.reshape(d, d)
        pk = float(np.trace(m).real)
        if pk < TOL.survival_floor:
            raise BadParameter("survival vanished inside the snapshot ensemble")
        buf[filled] = m
        surv[filled] = pk
        filled += 1
        acc += r
        total += pk
        if filled == len(buf):
            flush(filled)
            filled = 0
        r = sm @ r
    if filled:
        flush(filled)
    c = 1.0 / total
    avg = (acc * c).reshape(d, d)
    avg = 0.5 * (avg + avg.conj().T)
    chi = float(it.von_neumann_entropies(avg[None])[0] - c * weighted_h)
    return (chi if chi > 0 else 0.0), c


def _resolve(model, d, tail_eps, rebuild, k_max, max_rebuilds=4):
    pdf = waiting_pdf(model, tail_eps, k_max)
    stats = sharpness(pdf)
    for _ in range(max_rebuilds + 1):
        try:
            cg = coarse_grain_params(stats, d, model.step)
            return model, pdf, stats, cg
        except DeltaBelowStep:
            if rebuild is None:
                raise
            exact = stats.mu / (stats.R**2 * d)
            model = rebuild(exact / 2)
            pdf = waiting_pdf(model, tail_eps, k_max)
            stats = sharpness(pdf)
    raise DeltaBelowStep("coarse-graining width stayed below the rebuilt step")


def verify_chain(model: GeneratorModel, d: int | None = None, tail_eps: float = 1e-12,
                 rebuild: Callable[[float], GeneratorModel] | None = None,
                 strict_case_one: bool = False, k_max: int = DEFAULT_KMAX) -> BoundReport:
    """Evaluate every inequality of the proof chain on ``model``.

    ``d`` is the declared dimension (defaults to the model's).  When the
    coarse width falls below the step in the full case, ``rebuild(step)``
    is called to re-simulate at a finer step; without it ``DeltaBelowStep``
    propagates.  With ``strict_case_one`` the trivial case raises ``CaseOne``.
    """
    d = int(model.dim if d is None else d)
    if d < 4:
        raise BadParameter("the proof chain needs d >= 4")
    model, pdf, stats, cg = _resolve(model, d, tail_eps, rebuild, k_max)
    if cg.case == "i" and strict_case_one:
        raise CaseOne(f"R = {stats.R:.6g} < d^(3/2) = {d**1.5:.6g}: the bound holds trivially")
    rd = d**-0.5
    mu, sigma, R, delta = stats.mu, stats.sigma, stats.R, cg.delta
    coarse = coarse_pdf(pdf, cg)
    p = np.asarray(coarse.probs)
    P = coarse.survival()
    kmn, kpl = cg.k_minus, cg.k_plus
    checks: list[Check] = []
    notes: list[str] = []
    if cg.case == "i":
        notes.append("case i: R < d^(3/2), the sharpness bound holds trivially")
    if cg.clamped:
        notes.append("coarse width clamped to one step")

    # Chebyshev window and everything built on it need K- >= 1
    cheb = None
    window_ok = 1 <= kmn <= len(p)
    if window_ok:
        lo, hi = kmn, min(kpl, len(p))
        cheb = float(p[lo - 1:hi].sum())
        checks.append(Check("chebyshev_mass", cheb, 1 - rd, ">="))
        checks.append(Check("survival_floor", float(P[kmn - 1]), 1 - rd, ">="))
        k_ens = kmn
    else:
        notes.append("K- < 1: window checks skipped")
        k_ens = max(1, min(math.floor(mu / delta), len(p)))

    avg_h, avg_p = it._shifted_averages(p, P, k_ens)
    C = 1.0 / float(P[:k_ens].sum())
    h_avg = it.shannon_entropy(avg_p)
    I_CT = max(h_avg - avg_h, 0.0) if k_ens > 1 else 0.0
    H0 = it.shannon_entropy(p)

    if window_ok:
        checks.append(Check("normalizer_lower", C, 1 / kmn, ">="))
        checks.append(Check("normalizer_upper", C, 1 / (kmn * (1 - rd)), "<="))
        checks.append(Check("average_entropy", avg_h, H0 * (1 + 2 * rd), "<="))
        two_k = 2 * kmn - kpl
        if two_k > 0 and C < 1 / math.e:
            rhs = (1 - rd) * (two_k / kmn) * math.log2(kmn)
            checks.append(Check("entropy_of_average", h_avg, rhs, ">="))
        else:
            notes.append("entropy_of_average skipped: window too wide for the bound")

    I_CS, _ = snapshot_holevo(model, k_ens, cg.steps_per_delta)
    checks.append(Check("dimension_vs_holevo", math.log2(d), I_CS, ">="))
    checks.append(Check("holevo_vs_tick_information", I_CS, I_CT, ">="))

    # binning guarantees and the discrete max-entropy bound hold in general
    mu_b, var_b = it.binned_moments(p / p.sum(), delta) if coarse.tail < 1e-9 else (None, None)
    if mu_b is not None:
        gap_mu, gap_var = it.discretization_gap_bounds(mu, delta)
        checks.append(Check("mean_convergence", abs(mu_b - mu), gap_mu, "<="))
        checks.append(Check("variance_convergence", abs(var_b - stats.sigma2), gap_var, "<="))
        sig_b = math.sqrt(var_b) / delta
        if sig_b >= 1:
            checks.append(Check("discrete_max_entropy", H0, it.max_entropy_bound(sig_b).bound_bits, "<="))

    ceiling = explicit_bound_ceiling(d)
    checks.append(Check("explicit_ceiling", R, ceiling, "<="))

    errs = None
    if cg.case == "ii":
        errs = error_terms(d, R, mu, sigma, delta)
        et = errs.eps_tilde_d
        a = d**0.25 * sigma
        checks.append(Check("eps_tilde", et, 3 * rd, "<="))
        checks.append(Check("E_factor", errs.E_factor, 1 + et, "<="))
        checks.append(Check("eta_tilde", errs.eta_tilde, eta_ceiling(d, R), "<="))
        if window_ok:
            base = mu - a - delta
            rhs0 = (1 - rd) * (1 - 2 * (a + delta) / base) * math.log2(base / delta)
            checks.append(Check("entropy_of_average_explicit", h_avg, rhs0, ">="))
            rhs1 = (1 - rd * (3 + 2 * et)) * (math.log2(mu / delta) - rd * LOG2E * (1 + et))
            checks.append(Check("entropy_of_average_eps", h_avg, rhs1, ">="))
            inter = (1 + 2 * rd) * (math.log2(mu / delta) - H0) - errs.eta_tilde
            checks.append(Check("dimension_intermediate", math.log2(d), inter, ">="))
        rhs_c = 0.5 * math.log2(TWO_PI_E * stats.sigma2) + 6 * LOG2E * d**-2.5 + zeta(d**3.25 / 2)
        checks.append(Check("continuum_entropy", math.log2(delta) + H0, rhs_c, "<="))
        checks.append(Check("explicit_bound", math.log2(d), explicit_bound_rhs(R, d), ">="))

    return BoundReport(d, stats, cg, I_CS, I_CT, cheb, errs, checks, k_ens, notes)


# ------------------------------------------------------- incoherent models


def _is_diagonal(m: np.ndarray, tol: float) -> bool:
    off = m - np.diag(np.diagonal(m))
    return float(np.max(np.abs(off), initial=0.0)) <= tol


def incoherent_check(model: GeneratorModel, d: int | None = None, tol: float = 1e-10) -> Check:
    """``R (1 - q_max) <= d`` for a classical (diagonal-preserving) generator.

    ``q_max`` is the largest per-step probability of leaving a basis level
    (by a silent jump or a tick).  Raises ``NotIncoherent`` when the
    instrument creates coherences from basis states or ``rho0`` has any.
    """
    inst = model.instrument
    n = inst.dim
    d = n if d is None else int(d)
    if not _is_diagonal(np.asarray(model.rho0), tol):
        raise NotIncoherent("initial state has coherences")
    basis = np.zeros((n, n, n), dtype=complex)
    basis[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    stay = np.empty(n)
    for i in range(n):
        a = inst.no_tick_map(basis[i])
        b = inst.tick_map(basis[i])
        if not (_is_diagonal(a, tol) and _is_diagonal(b, tol)):
            raise NotIncoherent(f"instrument creates coherences from level {i}")
        stay[i] = a[i, i].real
    q_max = float(np.max(1.0 - stay))
    stats = sharpness(waiting_pdf(model))
    return Check("incoherent_ceiling", stats.R * (1 - q_max), d + 1e-6, "<=")
