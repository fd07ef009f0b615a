"""Reference generator families.

These double as test fixtures and as probes of how sharp a d-dimensional
generator can actually be made.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numerics as nx
from .errors import BadParameter, StepTooLarge
from .generator import GeneratorModel, QuantumInstrument, from_lindblad, require_valid


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; the same seed always gives the same draws."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _basis_state(d: int, i: int) -> np.ndarray:
    rho = np.zeros((d, d), dtype=complex)
    rho[i, i] = 1.0
    return rho


def poisson_clock(rate: float, delta: float) -> GeneratorModel:
    q = rate * delta
    if not rate > 0 or not delta > 0:
        raise BadParameter("rate and delta must be positive")
    if q >= 0.1:
        raise StepTooLarge(f"rate*delta = {q:g} must stay below 0.1")
    inst = QuantumInstrument.from_kraus([[[math.sqrt(1 - q)]]], [[[math.sqrt(q)]]], delta)
    return GeneratorModel(inst, np.eye(1))


def ladder_clock(d: int, q: float, delta: float = 1.0) -> GeneratorModel:
    """Classical d-rung chain: hop up with probability q per step, tick off the top.

    The waiting time is a sum of d geometric variables, so ``R = d/(1-q)``.
    """
    if int(d) != d or d < 1:
        raise BadParameter(f"d must be a positive integer, got {d}")
    if not 0 < q <= 0.5:
        raise BadParameter(f"q must lie in (0, 0.5], got {q}")
    if not delta > 0:
        raise BadParameter("delta must be positive")
    d = int(d)
    no_tick = [math.sqrt(1 - q) * np.eye(d)]
    for i in range(d - 1):
        hop = np.zeros((d, d))
        hop[i + 1, i] = math.sqrt(q)
        no_tick.append(hop)
    tick = np.zeros((d, d))
    tick[0, d - 1] = math.sqrt(q)
    inst = QuantumInstrument.from_kraus(no_tick, [tick], delta)
    return GeneratorModel(inst, _basis_state(d, 0))


def time_basis(d: int) -> np.ndarray:
    """Columns are the discrete-Fourier states ``|theta_k>`` in the energy basis."""
    n = np.arange(d)
    return np.exp(-2j * np.pi * np.outer(n, n) / d) / math.sqrt(d)


def quasi_ideal_state(d: int, width: float, center: float) -> np.ndarray:
    """Gaussian wavepacket of time-basis width ``width`` centred at site ``center``.

    Built in the energy basis, centred mid-band, so the packet moves rigidly
    under the clock Hamiltonian.
    """
    n = np.arange(d)
    n0 = (d - 1) / 2
    sigma_n = d / (4 * math.pi * width)
    amp = np.exp(-((n - n0) ** 2) / (4 * sigma_n**2)) * np.exp(-2j * np.pi * n * center / d)
    return amp / np.linalg.norm(amp)


def quasi_ideal_clock(d: int, width: float, gamma: float, site: int = 0,
                      delta: float | None = None, site_time: float = 1.0,
                      travel: float = 0.5) -> GeneratorModel:
    """Coherent clock: rigidly rotating wavepacket read out at one time-basis site.

    ``H = sum_n n (2 pi/(d T)) |n><n|`` moves ``|theta_k>`` to ``|theta_{k+1}>``
    every ``T = site_time``.  The tick jump is ``sqrt(gamma) |theta_site><theta_site|``
    and the packet starts ``travel`` of a cycle before ``site`` (0.5: opposite).
    """
    if int(d) != d or d < 4:
        raise BadParameter(f"quasi-ideal clock needs integer d >= 4, got {d}")
    d = int(d)
    if not 1 <= width <= math.sqrt(d):
        raise BadParameter(f"width must lie in [1, sqrt(d)] = [1, {math.sqrt(d):.3g}], got {width}")
    if not 0 < travel < 1:
        raise BadParameter("travel must lie in (0, 1)")
    if not gamma > 0 or not site_time > 0:
        raise BadParameter("gamma and site_time must be positive")
    omega = 2 * math.pi / (d * site_time)
    H = np.diag(omega * np.arange(d)).astype(complex)
    h_norm = omega * (d - 1)
    if delta is None:
        delta = 0.05 / (h_norm + gamma)
    if gamma * delta >= 0.1:
        raise StepTooLarge(f"gamma*delta = {gamma * delta:g} must stay below 0.1")
    theta = time_basis(d)[:, site % d]
    V = math.sqrt(gamma) * np.outer(theta, theta.conj())
    inst = from_lindblad(H, [V], [], delta)
    psi = quasi_ideal_state(d, width, (site - travel * d) % d)
    return GeneratorModel(inst, np.outer(psi, psi.conj()))


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    qm, r = np.linalg.qr(g)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return qm * ph[None, :]


def random_instrument(d: int, w: float, seed: int) -> GeneratorModel:
    """Random coherent instrument whose per-step tick probability lies in [w, 2w].

    The no-tick operator is ``U diag(sqrt(1 - w c_i)) V^dagger`` with random
    unitaries and ``c_i`` in [1, 2]; the tick operator completes it.
    """
    if not 0 < w < 1:
        raise BadParameter("tick weight w must lie in (0, 1)")
    rng = make_rng(seed)
    u = random_unitary(d, rng)
    v = random_unitary(d, rng)
    c_hi = min(2.0, 1.0 / w)
    c = 1.0 + rng.random(d) * (c_hi - 1.0)
    k0 = (u * np.sqrt(np.clip(1.0 - w * c, 0.0, None))[None, :]) @ v.conj().T
    rest = np.eye(d) - k0.conj().T @ k0
    tick = random_unitary(d, rng) @ nx.psd_factor(0.5 * (rest + rest.conj().T))
    inst = QuantumInstrument.from_kraus([k0], [tick], 1.0)
    return GeneratorModel(inst, random_density(d, rng))


def random_lindblad_clock(d: int, seed: int, delta: float | None = None) -> GeneratorModel:
    """Random continuous-time clock: noisy hopping chain read out at the last level.

    ``H`` is a nearest-neighbour chain with random couplings in [0.5, 1.5]
    plus a GUE perturbation of random strength up to 0.5; the tick jump
    ``sqrt(gamma)|0><d-1|`` has ``gamma`` in [0.5, 4].  Starts in ``|0>``.
    """
    if int(d) != d or d < 2:
        raise BadParameter(f"d must be an integer >= 2, got {d}")
    d = int(d)
    rng = make_rng(seed)
    H = np.zeros((d, d), dtype=complex)
    for i in range(d - 1):
        H[i, i + 1] = H[i + 1, i] = 0.5 + rng.random()
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H += 0.5 * rng.random() * (g + g.conj().T) / (2 * math.sqrt(d))
    gamma = 0.5 + 3.5 * rng.random()
    V = np.zeros((d, d), dtype=complex)
    V[0, d - 1] = math.sqrt(gamma)
    if delta is None:
        delta = 0.05 / (nx.spectral_norm_hermitian(H) + gamma)
    return GeneratorModel(from_lindblad(H, [V], [], delta), _basis_state(d, 0))


def random_diagonal_instrument(d: int, seed: int, q_max: float = 0.5) -> GeneratorModel:
    """Random classical (incoherent) chain on d levels.

    Each level is left with probability at most ``q_max`` per step; the exit
    mass is split at random among the other levels and the tick.
    """
    if not 0 < q_max <= 1:
        raise BadParameter("q_max must lie in (0, 1]")
    rng = make_rng(seed)
    exit_p = q_max * (0.05 + 0.95 * rng.random(d))
    no_tick = []
    tick = []
    for i in range(d):
        split = rng.dirichlet(np.ones(d))  # d-1 other levels + tick
        stay = np.zeros((d, d))
        stay[i, i] = math.sqrt(1.0 - exit_p[i])
        no_tick.append(stay)
        others = [j for j in range(d) if j != i]
        for j, frac in zip(others, split[:-1]):
            op = np.zeros((d, d))
            op[j, i] = math.sqrt(exit_p[i] * frac)
            no_tick.append(op)
        op = np.zeros((d, d))
        op[0, i] = math.sqrt(exit_p[i] * split[-1])
        tick.append(op)
    inst = QuantumInstrument.from_kraus(no_tick, tick, 1.0)
    p0 = rng.dirichlet(np.ones(d))
    return GeneratorModel(inst, np.diag(p0).astype(complex))


@dataclass(frozen=True)
class ClockFamily:
    """A named builder plus the names of its tunable parameters."""

    name: str
    build: Callable[..., GeneratorModel]
    params: tuple[str, ...]
    defaults: dict = field(default_factory=dict)

    def __call__(self, d: int, *values, **overrides) -> GeneratorModel:
        kw = dict(self.defaults)
        kw.update(dict(zip(self.params, values)))
        kw.update(overrides)
        model = self.build(d, **kw)
        require_valid(model.instrument)
        return model


def _poisson(d, rate=1.0, delta=1e-3):
    return poisson_clock(rate, delta)


def _ladder(d, q=0.01, delta=1.0):
    return ladder_clock(d, q, delta)


def _quasi(d, width=None, gamma=4.0, travel=0.5, site=0, delta=None):
    if width is None:
        width = min(max(1.0, math.sqrt(d / (4 * math.pi)) * 1.5), math.sqrt(d))
    return quasi_ideal_clock(d, width, gamma, int(site), delta, travel=travel)


def _random(d, w=0.1, seed=0):
    return random_instrument(d, w, int(seed))


FAMILIES = {
    "poisson": ClockFamily("poisson", _poisson, ("rate",), {"rate": 1.0, "delta": 1e-3}),
    "ladder": ClockFamily("ladder", _ladder, ("q",), {"q": 0.01, "delta": 1.0}),
    "quasi-ideal": ClockFamily("quasi-ideal", _quasi, ("width", "gamma", "travel")),
    "random": ClockFamily("random", _random, ("w",), {"w": 0.1, "seed": 0}),
}
