"""Discrete-step quantum instruments and their tick statistics.

A generator is an initial state plus a two-outcome instrument: the no-tick
branch ``N`` and the tick branch ``J``, each given by Kraus operators, with
``N + J`` trace preserving.  One application of the instrument is one time
step of length ``step``.

Superoperators use row-major vectorisation, ``vec(A X B) = (A kron B^T) vec(X)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .errors import (
    BadParameter,
    CompletionFailed,
    DegenerateDistribution,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidInstrument,
    NonSingleton,
    NotDensity,
    StepTooLarge,
    TailTooHeavy,
)
from .numerics import TOL, dagger

BLOCK = 256
DEFAULT_KMAX = 5_000_000


def _kraus_stack(ops, d: int | None, name: str) -> np.ndarray:
    ops = [np.asarray(k, dtype=complex) for k in ops]
    if not ops:
        if d is None:
            raise DimensionMismatch(f"cannot infer dimension from empty {name} set")
        return np.zeros((0, d, d), dtype=complex)
    arr = np.stack(ops)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatch(f"{name} Kraus operators must be square, got {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise DimensionMismatch(f"{name} Kraus operators have dimension {arr.shape[1]}, expected {d}")
    return arr


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantumInstrument:
    no_tick_kraus: np.ndarray
    tick_kraus: np.ndarray
    step: float = 1.0

    def __post_init__(self):
        if not self.step > 0:
            raise BadParameter(f"step must be positive, got {self.step}")
        object.__setattr__(self, "no_tick_kraus", _frozen(self.no_tick_kraus))
        object.__setattr__(self, "tick_kraus", _frozen(self.tick_kraus))

    @classmethod
    def from_kraus(cls, no_tick, tick, step: float = 1.0, dim: int | None = None):
        nt = _kraus_stack(no_tick, dim, "no-tick")
        dim = nt.shape[1]
        t = _kraus_stack(tick, dim, "tick")
        return cls(nt, t, float(step))

    @property
    def dim(self) -> int:
        return self.no_tick_kraus.shape[1]

    def no_tick_map(self, rho: np.ndarray) -> np.ndarray:
        return _apply(self.no_tick_kraus, rho)

    def tick_map(self, rho: np.ndarray) -> np.ndarray:
        return _apply(self.tick_kraus, rho)

    def no_tick_superop(self) -> np.ndarray:
        return _superop(self.no_tick_kraus)

    def tick_superop(self) -> np.ndarray:
        return _superop(self.tick_kraus)

    def tick_effect(self) -> np.ndarray:
        k = self.tick_kraus
        return np.einsum("aji,ajk->ik", k.conj(), k)


def _apply(kraus: np.ndarray, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim == 2:
        return np.einsum("aij,ajk->ik", kraus @ rho, dagger(kraus))
    return np.einsum("aij,...jk,alk->...il", kraus, rho, kraus.conj(), optimize=True)


def _superop(kraus: np.ndarray) -> np.ndarray:
    d = kraus.shape[1]
    # row-major vec: vec(K X K^dagger) = (K (x) conj(K)) vec(X)
    s = np.einsum("aij,akl->ikjl", kraus, kraus.conj())
    return s.reshape(d * d, d * d)


def _check_density(rho: np.ndarray, tol: float = TOL.density_trace) -> None:
    if abs(np.trace(rho) - 1) > tol:
        raise NotDensity(f"trace {np.trace(rho).real:.12g} != 1")
    if np.max(np.abs(rho - dagger(rho)), initial=0.0) > tol:
        raise NotDensity("density operator is not Hermitian")
    if np.min(nx.eigvalsh(rho)) < -tol:
        raise NotDensity("density operator is not positive semidefinite")


@dataclass(frozen=True, eq=False)
class GeneratorModel:
    instrument: QuantumInstrument
    rho0: np.ndarray

    def __post_init__(self):
        rho = nx.as_matrix(self.rho0, "rho0")
        if rho.shape[0] != self.instrument.dim:
            raise DimensionMismatch(f"rho0 has dimension {rho.shape[0]}, instrument {self.instrument.dim}")
        _check_density(rho)
        object.__setattr__(self, "rho0", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.instrument.dim

    @property
    def step(self) -> float:
        return self.instrument.step


@dataclass(frozen=True)
class TickPdf:
    """Waiting-time distribution ``probs[k-1] = p(k)`` for ``k = 1..len(probs)``.

    ``tail`` is the survival probability beyond the last entry and
    ``tail_rate`` the per-step geometric decay used to extrapolate it.
    """

    probs: np.ndarray
    step: float
    tail: float = 0.0
    tail_rate: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < -1e-15):
            raise BadParameter("negative probability in pdf")
        total = p.sum() + self.tail
        if abs(total - 1.0) > 1e-9:
            raise BadParameter(f"pdf mass plus tail is {total!r}, not 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def k_max(self) -> int:
        return len(self.probs)

    def times(self) -> np.ndarray:
        return self.step * np.arange(1, self.k_max + 1)

    def survival(self) -> np.ndarray:
        """``P(k)`` for ``k = 0..k_max``: probability of no tick through step k."""
        tail_sums = np.concatenate((np.cumsum(self.probs[::-1])[::-1], [0.0]))
        return tail_sums + self.tail

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.probs)


@dataclass(frozen=True)
class SharpnessStats:
    mu: float
    sigma2: float
    R: float
    tail_error: float = 0.0

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True, eq=False)
class SnapshotEnsemble:
    """Conditional no-tick states ``rho_k`` and their survival probabilities.

    ``weights`` are the survival probabilities renormalised over the
    ensemble, ``normalizer`` the factor that does it.
    """

    states: np.ndarray
    survival: np.ndarray
    weights: np.ndarray
    normalizer: float
    stride: int = 1
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.survival)

    def head(self, n: int) -> "SnapshotEnsemble":
        if not 1 <= n <= len(self):
            raise IndexOutOfRange(f"ensemble has {len(self)} members, asked for {n}")
        surv = self.survival[:n]
        c = 1.0 / surv.sum()
        return SnapshotEnsemble(self.states[:n], surv, surv * c, c, self.stride, self.truncated)


# ---------------------------------------------------------------- operations


def validate(instrument: QuantumInstrument) -> float:
    """``max|sum K^dagger K - I|`` over both Kraus sets."""
    d = instrument.dim
    for k in (instrument.no_tick_kraus, instrument.tick_kraus):
        if k.ndim != 3 or k.shape[1:] != (d, d):
            raise DimensionMismatch("Kraus operators do not match the instrument dimension")
    total = np.zeros((d, d), dtype=complex)
    for k in (instrument.no_tick_kraus, instrument.tick_kraus):
        total += np.einsum("aji,ajk->ik", k.conj(), k)
    return float(np.max(np.abs(total - np.eye(d))))


def require_valid(instrument: QuantumInstrument, tol: float = TOL.trace_preservation) -> None:
    defect = validate(instrument)
    if defect > tol:
        raise InvalidInstrument(f"completeness defect {defect:.3e} exceeds {tol:g}")


def from_lindblad(H, tick_jumps=(), silent_jumps=(), delta: float = 1e-3) -> QuantumInstrument:
    """First-order instrument for ``dt = delta`` with exact Kraus completion.

    The no-tick operator starts as ``I - i delta H - delta/2 sum V^dagger V``;
    its positive part is then replaced so the instrument is exactly trace
    preserving while its unitary (polar) factor is kept.
    """
    H = nx.as_matrix(H, "H")
    d = H.shape[0]
    ticks = [np.asarray(v, dtype=complex) for v in tick_jumps]
    silent = [np.asarray(v, dtype=complex) for v in silent_jumps]
    for v in ticks + silent:
        if v.shape != (d, d):
            raise DimensionMismatch(f"jump operator shape {v.shape} does not match H ({d})")
    if not delta > 0:
        raise BadParameter("delta must be positive")
    vv = [dagger(v) @ v for v in ticks + silent]
    scale = nx.spectral_norm_hermitian(H) + sum(nx.spectral_norm_hermitian(m) for m in vv)
    if delta * scale > 0.1 + 1e-12:
        raise StepTooLarge(f"delta*(|H| + sum|V^dag V|) = {delta * scale:.3g} > 0.1")
    k0 = np.eye(d) - 1j * delta * H - 0.5 * delta * sum(vv, np.zeros((d, d), dtype=complex))
    others_nt = [math.sqrt(delta) * v for v in silent]
    others_t = [math.sqrt(delta) * v for v in ticks]
    rest = np.eye(d) - sum((dagger(k) @ k for k in others_nt + others_t), np.zeros((d, d), dtype=complex))
    rest = 0.5 * (rest + dagger(rest))
    try:
        root = nx.psd_factor(rest)
    except Exception as exc:
        raise CompletionFailed(str(exc)) from exc
    k0 = nx.polar_unitary(k0) @ root
    return QuantumInstrument.from_kraus([k0] + others_nt, others_t, step=delta, dim=d)


# ----------------------------------------------------- transfer-map machinery


class _Transfer:
    """Blocked evaluation of ``f . S^k . r0`` for the no-tick superoperator S."""

    def __init__(self, model: GeneratorModel, block: int = BLOCK):
        inst = model.instrument
        d = inst.dim
        self.d = d
        self.s = inst.no_tick_superop()
        self.r0 = np.asarray(model.rho0).reshape(-1)
        self.jvec = inst.tick_effect().T.reshape(-1)
        self.evec = np.eye(d).reshape(-1).astype(complex)
        self.block = block
        self.wj = self._rows(self.jvec)
        self.we = self._rows(self.evec)
        self.sb = np.linalg.matrix_power(self.s, block)

    def _rows(self, f: np.ndarray) -> np.ndarray:
        rows = np.empty((self.block, f.size), dtype=complex)
        row = f.astype(complex)
        for i in range(self.block):
            rows[i] = row
            row = row @ self.s
        return rows


def _scan(model: GeneratorModel, tail_eps: float, k_max: int):
    """Tick probabilities p(1..K) and survivals P(0..K) until P(K) <= tail_eps."""
    tr = _Transfer(model)
    d2 = tr.d * tr.d
    r = tr.r0.copy()
    probs: list[np.ndarray] = []
    surv: list[np.ndarray] = []
    k0 = 0
    silent_run = 0
    decaying = False
    while True:
        pj = (tr.wj @ r).real
        pe = (tr.we @ r).real
        probs.append(pj)
        surv.append(pe)
        r = tr.sb @ r
        k0 += tr.block
        below = np.nonzero(pe <= tail_eps)[0]
        if below.size:
            break
        p_end = pe[-1]
        if np.all(pj <= 1e-15 * max(p_end, 1e-300)):
            silent_run += tr.block
            if silent_run >= max(d2, 4 * tr.block) and not decaying:
                # A long silence is only conclusive if N has a non-decaying sector.
                if np.max(np.abs(np.linalg.eigvals(tr.s))) < 1.0 - 1e-12:
                    decaying = True
                else:
                    raise NonSingleton(
                        f"survival plateaus at {p_end:.6g} with no tick flux: the generator never ticks")
        else:
            silent_run = 0
        if k0 >= k_max:
            raise NonSingleton(f"survival {p_end:.3g} still above {tail_eps:g} after {k0} steps")
    p = np.concatenate(probs)
    P = np.concatenate(surv)  # P[k] for k = 0..k0-1 ; p[k] is p(k+1)
    K = int(np.nonzero(P <= tail_eps)[0][0])
    return p[:K], P[: K + 1]


def _tail_rate(P: np.ndarray, window: int = BLOCK) -> float:
    n = len(P) - 1
    if n < 1 or P[-1] <= 0:
        return 0.0
    w = min(window, n)
    if P[-1 - w] <= 0:
        return 0.0
    return float(np.clip((P[-1] / P[-1 - w]) ** (1.0 / w), 0.0, 1.0 - 1e-15))


def waiting_pdf(model: GeneratorModel, tail_eps: float = 1e-12, k_max: int = DEFAULT_KMAX) -> TickPdf:
    """First-tick distribution ``p(k) = tr J(N^{k-1}(rho0))``."""
    if not 0 < tail_eps <= 1e-6:
        raise BadParameter("tail_eps must lie in (0, 1e-6]")
    p, P = _scan(model, tail_eps, k_max)
    p = np.clip(p, 0.0, None)
    tail = max(float(P[-1]), 0.0)
    # Absorb the rounding residue (~1e-14) so mass plus tail is exactly 1.
    resid = 1.0 - p.sum() - tail
    if abs(resid) > 1e-9:
        raise NonSingleton(f"probability leak {resid:.3e}: instrument is not trace preserving")
    tail = max(tail + resid, 0.0)
    return TickPdf(p, model.step, tail, _tail_rate(P))


def survival_curve(model: GeneratorModel, k_max: int) -> np.ndarray:
    """``P(k) = tr N^k(rho0)`` for ``k = 0..k_max``."""
    tr = _Transfer(model)
    out = []
    r = tr.r0.copy()
    n = 0
    while n <= k_max:
        out.append((tr.we @ r).real)
        r = tr.sb @ r
        n += tr.block
    return np.concatenate(out)[: k_max + 1]


def conditional_trajectory(model: GeneratorModel, k_max: int, stride: int = 1) -> SnapshotEnsemble:
    """States conditioned on no tick, sampled every ``stride`` steps.

    Returns ``rho_k = N^{k*stride}(rho0) / P(k)`` for ``k = 0..k_max``.  If the
    survival drops below 1e-14 the trajectory is truncated and flagged.
    """
    if k_max < 1 or stride < 1:
        raise BadParameter("k_max and stride must be >= 1")
    inst = model.instrument
    d = inst.dim
    sm = np.linalg.matrix_power(inst.no_tick_superop(), stride)
    r = np.asarray(model.rho0).reshape(-1).copy()
    states = np.empty((k_max + 1, d, d), dtype=complex)
    surv = np.empty(k_max + 1)
    truncated = False
    n = k_max + 1
    for k in range(k_max + 1):
        m = r.reshape(d, d)
        pk = float(np.trace(m).real)
        if pk < TOL.survival_floor:
            truncated = True
            n = k
            break
        rho = m / pk
        states[k] = 0.5 * (rho + dagger(rho))
        surv[k] = pk
        r = sm @ r
    states, surv = states[:n], surv[:n]
    c = 1.0 / surv.sum()
    return SnapshotEnsemble(states, surv, surv * c, c, stride, truncated)


def shift_pdf(p0: TickPdf, P, k: int) -> TickPdf:
    """Distribution of the next tick given no tick through step ``k``."""
    P = np.asarray(P, dtype=float)
    if not 0 <= k < len(P) or P[k] <= 0:
        raise IndexOutOfRange(f"cannot shift by {k}: survival list has {len(P)} entries")
    if k == 0:
        return p0
    pk = float(P[k])
    probs = np.asarray(p0.probs[k:]) / pk
    tail = p0.tail / pk
    resid = 1.0 - probs.sum() - tail
    return TickPdf(probs, p0.step, max(tail + resid, 0.0), p0.tail_rate)


def _tail_moments(pdf: TickPdf):
    """Contributions of the geometric tail to E[k] and E[k^2]."""
    T, r, K = pdf.tail, pdf.tail_rate, pdf.k_max
    if T <= 0:
        return 0.0, 0.0
    g = 1.0 / (1.0 - r)
    m1 = T * (K + g)
    m2 = T * (K * K + 2 * K * g + (1 + r) * g * g)
    return m1, m2


def sharpness(pdf: TickPdf, max_tail: float = 1e-9) -> SharpnessStats:
    """Mean, variance and ``R = mu^2 / sigma^2`` of a waiting-time pdf."""
    if pdf.tail > max_tail:
        raise TailTooHeavy(f"tail {pdf.tail:.3e} exceeds {max_tail:g}")
    k = np.arange(1, pdf.k_max + 1, dtype=float)
    p = pdf.probs
    t1, t2 = _tail_moments(pdf)
    m1 = float(np.dot(k, p)) + t1
    c2 = float(np.dot((k - m1) ** 2, p)) + (t2 - 2 * m1 * t1 + m1 * m1 * pdf.tail)
    if c2 <= 1e-14 * m1 * m1:
        raise DegenerateDistribution("zero variance: R is undefined")
    mu = m1 * pdf.step
    sigma2 = c2 * pdf.step**2
    return SharpnessStats(mu, sigma2, mu * mu / sigma2, t1 * pdf.step)


def singletonize(model: GeneratorModel) -> GeneratorModel:
    """Append an absorbing silent level; every tick sends the system there."""
    inst = model.instrument
    d = inst.dim
    D = d + 1

    def embed(k):
        out = np.zeros((D, D), dtype=complex)
        out[:d, :d] = k
        return out

    silent = np.zeros((D, D), dtype=complex)
    silent[d, d] = 1.0
    no_tick = [embed(k) for k in inst.no_tick_kraus] + [silent]
    ticks = []
    for k in inst.tick_kraus:
        for i in range(d):
            row = k[i]
            if np.any(row != 0):
                op = np.zeros((D, D), dtype=complex)
                op[d, :d] = row
                ticks.append(op)
    rho = np.zeros((D, D), dtype=complex)
    rho[:d, :d] = model.rho0
    return GeneratorModel(QuantumInstrument.from_kraus(no_tick, ticks, inst.step, dim=D), rho)


def multi_tick_probability(model: GeneratorModel, horizon: int) -> float:
    """Probability of at least two ticks within ``horizon`` steps."""
    inst = model.instrument
    rho0 = np.array(model.rho0)
    rho1 = np.zeros_like(rho0)
    total = 0.0
    for _ in range(horizon):
        total += float(np.trace(inst.tick_map(rho1)).real)
        rho0, rho1 = inst.no_tick_map(rho0), inst.tick_map(rho0) + inst.no_tick_map(rho1)
    return total


def reset_concatenate(pdf: TickPdf, n: int, max_tail: float = 1e-9) -> TickPdf:
    """Waiting time of the n-th tick of a clock reset after every tick."""
    if n < 1:
        raise BadParameter("n must be >= 1")
    if pdf.tail > max_tail:
        raise TailTooHeavy(f"tail {pdf.tail:.3e} exceeds {max_tail:g}")
    if n == 1:
        return pdf
    base = np.concatenate(([0.0], pdf.probs))  # index = k
    out = base
    for _ in range(n - 1):
        out = np.convolve(out, base)
    probs = out[1:]
    tail = 1.0 - probs.sum()
    return TickPdf(probs, pdf.step, max(tail, 0.0), pdf.tail_rate)


# ---------------------------------------------------------------------- JSON


def _mat_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _mat_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def model_to_dict(model: GeneratorModel) -> dict:
    inst = model.instrument
    return {
        "dim": inst.dim,
        "step": inst.step,
        "no_tick_kraus": [_mat_to_json(k) for k in inst.no_tick_kraus],
        "tick_kraus": [_mat_to_json(k) for k in inst.tick_kraus],
        "rho0": _mat_to_json(model.rho0),
    }


def model_from_dict(data: dict) -> GeneratorModel:
    try:
        d = int(data["dim"])
        inst = QuantumInstrument.from_kraus(
            [_mat_from_json(k) for k in data["no_tick_kraus"]],
            [_mat_from_json(k) for k in data["tick_kraus"]],
            float(data["step"]),
            dim=d,
        )
        rho0 = _mat_from_json(data["rho0"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInstrument(f"malformed generator JSON: {exc}") from exc
    require_valid(inst)
    return GeneratorModel(inst, rho0)


def save_model(model: GeneratorModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> GeneratorModel:
    return model_from_dict(json.loads(Path(path).read_text()))
