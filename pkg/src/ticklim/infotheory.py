"""Entropies, Holevo information and the max-entropy / discretisation lemmas.

All information quantities are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .errors import (
    BadParameter,
    IndexOutOfRange,
    NegativeProbability,
    NoConvergence,
    NotDensity,
    SigmaTooSmall,
)
from .generator import TickPdf
from .numerics import dagger

LOG2E = math.log2(math.e)
TWO_PI_E = 2 * math.pi * math.e


def _xlog2x(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def shannon_entropy(p) -> float:
    """``-sum p log2 p`` over the given mass; sub-normalised input is allowed."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -1e-15):
        raise NegativeProbability("probabilities must be non-negative")
    if p.sum() > 1 + 1e-9:
        raise NegativeProbability(f"total mass {p.sum():.12g} exceeds 1")
    return float(-np.sum(_xlog2x(np.clip(p, 0.0, None))))


def _spectra(rhos: np.ndarray) -> np.ndarray:
    lam = nx.eigvalsh(rhos, tol=1e-8)
    return np.clip(lam, 0.0, 1.0)


def _check_states(rhos: np.ndarray, tol: float = 1e-8) -> None:
    tr = np.trace(rhos, axis1=-2, axis2=-1)
    if np.any(np.abs(tr - 1) > tol):
        raise NotDensity("state trace differs from 1")
    if np.max(np.abs(rhos - dagger(rhos)), initial=0.0) > tol:
        raise NotDensity("state is not Hermitian")


def von_neumann_entropy(rho) -> float:
    rho = nx.as_matrix(rho, "rho")
    _check_states(rho)
    lam = _spectra(rho)
    if lam.min() < 0 or nx.eigvalsh(rho, tol=1e-8).min() < -1e-8:
        raise NotDensity("state is not positive semidefinite")
    return float(-np.sum(_xlog2x(lam)))


def von_neumann_entropies(rhos) -> np.ndarray:
    """Entropies of a stack of states, diagonalised together."""
    rhos = nx.as_matrix(rhos, "rho")
    _check_states(rhos)
    lam = _spectra(rhos)
    return -np.sum(_xlog2x(lam), axis=-1)


@dataclass(frozen=True, eq=False)
class CqEnsemble:
    weights: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        s = nx.as_matrix(self.states, "states")
        if s.ndim != 3 or len(w) != s.shape[0]:
            raise IndexOutOfRange("need one weight per state")
        if np.any(w < -1e-15) or abs(w.sum() - 1) > 1e-10:
            raise NegativeProbability("weights must form a probability distribution")
        _check_states(s)
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))
        object.__setattr__(self, "states", s)

    def average(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.weights, self.states)


def holevo_information(ens: CqEnsemble, entropies: np.ndarray | None = None) -> float:
    """``S(sum q rho) - sum q S(rho)``; pass precomputed member entropies to reuse them."""
    if entropies is None:
        entropies = von_neumann_entropies(ens.states)
    avg = ens.average()
    chi = von_neumann_entropies(avg[None])[0] - float(np.dot(ens.weights, entropies))
    return max(float(chi), 0.0)


def tick_mutual_information(p0: TickPdf, P, k_minus: int) -> float:
    """``H(<p_k>) - <H(p_k)>`` for the shifted pdfs ``p_k``, ``k < k_minus``.

    Uses ``p_k(s) = p0(k+s)/P(k)`` and weights proportional to ``P(k)``; both
    averages are evaluated with prefix sums, so the cost is linear in the pdf.
    """
    P = np.asarray(P, dtype=float)
    if k_minus < 1 or k_minus > len(P) or k_minus > p0.k_max:
        raise IndexOutOfRange(f"k_minus={k_minus} outside the available survival range")
    if np.any(P[:k_minus] <= 0):
        raise IndexOutOfRange("survival vanishes inside the ensemble")
    if k_minus == 1:
        return 0.0
    avg_h, avg_p = _shifted_averages(np.asarray(p0.probs), P, k_minus)
    return max(shannon_entropy(avg_p) - avg_h, 0.0)


def _shifted_averages(p: np.ndarray, P: np.ndarray, k_minus: int):
    """(<H(p_k)>, <p_k>) with weights ``P(k)/sum P`` over ``k < k_minus``."""
    Pk = P[:k_minus]
    c = 1.0 / Pk.sum()
    # A[k] = -sum_{s>k} p(s) log2 p(s)
    neg = -_xlog2x(p)
    A = np.concatenate((np.cumsum(neg[::-1])[::-1], [0.0]))[:k_minus]
    # H(p_k) = A[k]/P(k) + log2 P(k); weighted by c*P(k)
    avg_h = c * float(np.sum(A + Pk * np.log2(Pk)))
    # <p_k>(s) = c * sum_{k<K} p0(k+s), s = 1..len(p)
    cs = np.concatenate(([0.0], np.cumsum(p)))
    n = len(p)
    s = np.arange(1, n + 1)
    hi = np.minimum(s + k_minus - 1, n)
    avg_p = c * (cs[hi] - cs[s - 1])
    return avg_h, avg_p


def _log2m_on_support(rho: np.ndarray):
    spec = nx.hermitian_eig(rho, tol=1e-8)
    lam = np.clip(spec.eigenvalues, 0.0, None)
    logs = np.where(lam > 0, np.log2(np.where(lam > 0, lam, 1.0)), -1e3)
    u = spec.eigenvectors
    return (u * logs[None, :]) @ dagger(u)


def dctrl_blahut_arimoto(states, tol: float = 1e-9, max_iter: int = 100_000, history: list | None = None):
    """Maximise the Holevo information over input weights.

    Multiplicative update ``q_k <- q_k 2^{D(rho_k || rho_q)} / Z``.  Stops when
    the duality gap ``max_k D(rho_k||rho_q) - I(q)`` drops below ``tol``, which
    also bounds every later per-iteration gain.  Returns ``(q, 2**I)``.
    """
    rhos = nx.as_matrix(states, "states")
    if rhos.ndim == 2:
        rhos = rhos[None]
    _check_states(rhos)
    n = rhos.shape[0]
    if n == 1:
        return np.ones(1), 1.0
    h = von_neumann_entropies(rhos)
    q = np.full(n, 1.0 / n)
    prev = -np.inf
    for it in range(max_iter):
        avg = np.einsum("k,kij->ij", q, rhos)
        log_avg = _log2m_on_support(avg)
        # D(rho_k || avg) = -S(rho_k) - tr rho_k log avg
        cross = np.einsum("kij,ji->k", rhos, log_avg).real
        D = np.maximum(-h - cross, 0.0)
        info = float(np.dot(q, D))
        if history is not None:
            history.append(info)
        if info < prev - 1e-12:
            raise NoConvergence(f"objective decreased at iteration {it}")
        prev = info
        if D.max() - info < tol:
            return q, 2.0**info
        logits = np.log(q, where=q > 0, out=np.full(n, -np.inf)) + D / LOG2E
        logits -= logits.max()
        q = np.exp(logits)
        q /= q.sum()
    raise NoConvergence(f"Blahut-Arimoto did not reach gap {tol:g} in {max_iter} iterations")


# ---------------------------------------------------------- max-entropy lemma


def zeta(x: float) -> float:
    """Exponentially small correction to the discrete Gaussian entropy bound."""
    if not x > 0:
        raise SigmaTooSmall("zeta needs x > 0")
    a = 2 * math.pi**2 * x * x
    if a > 700:  # e^{-a} underflows
        return 0.0
    e = math.exp(-a)
    one_minus = -math.expm1(-a)
    return 0.5 * LOG2E * e * (6 / one_minus + 2 * math.pi**2 * x * (1 + e) / one_minus**3)


@dataclass(frozen=True)
class MaxEntBound:
    sigma: float
    bound_bits: float
    zeta_bits: float


def max_entropy_bound(sigma: float) -> MaxEntBound:
    """Upper bound on the entropy of an integer distribution with std ``sigma >= 1``."""
    if not sigma >= 1:
        raise SigmaTooSmall(f"sigma must be >= 1, got {sigma}")
    z = zeta(sigma)
    return MaxEntBound(sigma, max_entropy_value(sigma), z)


def max_entropy_value(sigma: float) -> float:
    """The bound's formula without the ``sigma >= 1`` domain check."""
    return 0.5 * math.log2(TWO_PI_E * sigma * sigma) + zeta(sigma)


def discretization_gap_bounds(mu: float, delta: float) -> tuple[float, float]:
    """Guaranteed gaps between a pdf's (mean, variance) and its binned version."""
    return delta, 4 * delta * (delta + 2 * mu)


def binned_moments(p, delta: float) -> tuple[float, float]:
    """(Delta mu^Delta, (Delta sigma^Delta)^2) of bins ``p(n)`` on ``((n-1)Delta, n Delta]``."""
    p = np.asarray(p, dtype=float)
    n = np.arange(1, len(p) + 1)
    m = float(np.dot(n, p)) / p.sum()
    v = float(np.dot((n - m) ** 2, p)) / p.sum()
    return delta * m, delta * delta * v


# ------------------------------------------------ brute-force max entropy


@dataclass(frozen=True)
class MaxEntSearch:
    support: int
    sigma: float
    entropy_bits: float
    achieved_sigma: float
    probs: np.ndarray


def _variance(p: np.ndarray, n: np.ndarray) -> float:
    m = float(np.dot(n, p))
    return float(np.dot((n - m) ** 2, p))


def max_entropy_search(support: int, sigma: float, starts: int = 8, seed: int = 0) -> MaxEntSearch:
    """Largest entropy over distributions on ``1..support`` with std ``sigma``.

    Multi-start SLSQP over softmax logits (so the simplex constraint is
    implicit) with an equality constraint on the variance.  Independent of
    the closed-form bound; used to check it.
    """
    from scipy.optimize import minimize
    from scipy.special import softmax

    from .clock_zoo import make_rng

    if support < 2:
        raise BadParameter("support must have at least two points")
    n = np.arange(1, support + 1, dtype=float)
    target = sigma * sigma
    if not 0 < target <= (support - 1) ** 2 / 4:
        raise BadParameter(f"sigma {sigma} is not attainable on 1..{support}")
    rng = make_rng(seed)

    def pull_back(p, g):
        # gradient w.r.t. logits of a function with gradient g w.r.t. p
        return p * (g - np.dot(p, g))

    def neg_h(z):
        return float(np.sum(_xlog2x(softmax(z))))

    def neg_h_grad(z):
        p = softmax(z)
        return pull_back(p, (np.log(np.maximum(p, 1e-300)) + 1.0) * LOG2E)

    def var_gap(z):
        return (_variance(softmax(z), n) - target) / target

    def var_grad(z):
        p = softmax(z)
        return pull_back(p, (n - np.dot(n, p)) ** 2 / target)

    cons = [{"type": "eq", "fun": var_gap, "jac": var_grad}]
    best = None
    for _ in range(starts):
        z0 = rng.normal(size=support)
        res = minimize(neg_h, z0, jac=neg_h_grad, constraints=cons, method="SLSQP",
                       options={"maxiter": 1000, "ftol": 1e-15})
        p = softmax(res.x)
        var = _variance(p, n)
        if abs(var - target) > 1e-6 * target:
            continue
        h = shannon_entropy(p)
        if best is None or h > best.entropy_bits:
            best = MaxEntSearch(support, sigma, h, math.sqrt(var), p)
    if best is None:
        raise NoConvergence("no start reached the variance constraint")
    return best


def gibbs_max_entropy(support: int, sigma: float) -> float:
    """Entropy of the symmetric discrete Gaussian on ``1..support`` with std ``sigma``."""
    from scipy.optimize import brentq

    n = np.arange(1, support + 1, dtype=float)
    c = (support + 1) / 2

    def dist(lam):
        w = np.exp(-lam * (n - c) ** 2)
        return w / w.sum()

    def gap(lam):
        return float(np.dot((n - c) ** 2, dist(lam))) - sigma * sigma

    return shannon_entropy(dist(brentq(gap, 1e-12, 50.0, xtol=1e-15)))
