"""Derivative-free sharpness maximisation and dimension scans."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import bound_pipeline as bp
from .clock_zoo import FAMILIES, ClockFamily, make_rng
from .errors import BadParameter, BoundViolation, DegenerateObjective, TicklimError
from .generator import SharpnessStats, sharpness, singletonize, waiting_pdf
from .infotheory import TWO_PI_E

RESTARTS = 3


@dataclass(frozen=True)
class ParamSpace:
    """Box ``[lower, upper]`` over the named parameters of a clock family.

    A coordinate with ``lower == upper`` is held fixed.
    """

    names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    family: ClockFamily

    def __post_init__(self):
        if not (len(self.names) == len(self.lower) == len(self.upper)):
            raise BadParameter("names, lower and upper must have equal length")
        if any(not lo <= hi for lo, hi in zip(self.lower, self.upper)):
            raise BadParameter("box needs lower <= upper componentwise")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def width(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float) - self.lo

    def point(self, u) -> dict:
        x = self.lo + np.clip(u, 0.0, 1.0) * self.width
        return dict(zip(self.names, (float(v) for v in x)))

    def build(self, d: int, params: dict):
        return self.family(d, **params)


def default_space(family: str, d: int | None = None) -> ParamSpace:
    """Search boxes used by the CLI for each zoo family."""
    if family not in FAMILIES:
        raise BadParameter(f"unknown family {family!r}")
    fam = FAMILIES[family]
    if family == "ladder":
        return ParamSpace(("q",), (0.001,), (0.5,), fam)
    if family == "poisson":
        return ParamSpace(("rate",), (0.1,), (10.0,), fam)
    if family == "quasi-ideal":
        wmax = math.sqrt(d) if d else 2.0
        return ParamSpace(("width", "gamma", "travel"), (1.0, 1.0, 0.3), (wmax, 10.0, 0.9), fam)
    if family == "random":
        return ParamSpace(("w",), (0.02,), (0.5,), fam)
    raise BadParameter(f"unknown family {family!r}")


@dataclass(frozen=True)
class ScanRow:
    d: int
    params: tuple[float, ...]
    R: float
    bound: float
    ratio: float
    I_CS_bits: float
    seed: int


class _BudgetSpent(Exception):
    pass


def first_tick_sharpness(space: ParamSpace, d: int, params: dict, tail_eps: float = 1e-12) -> SharpnessStats:
    model = singletonize(space.build(d, params))
    return sharpness(waiting_pdf(model, tail_eps))


def maximize_sharpness(space: ParamSpace, d: int, budget: int = 60, seed: int = 0,
                       tail_eps: float = 1e-12):
    """Best ``(params, stats)`` found by Nelder-Mead from three random starts.

    A quarter of the budget screens uniform random points; the three best
    become the Nelder-Mead starts.  The objective is the first-tick sharpness of the singletonized model.
    Evaluations that raise a library error count against the budget and
    score as failures.  A result above ``2 pi e d^2`` raises ``BoundViolation``.
    """
    free = space.width > 0
    if not np.any(free):
        params = space.point(np.zeros(len(space.names)))
        stats = _checked(space, d, params, tail_eps)
        return params, stats
    if budget < 20:
        raise BadParameter("budget must be at least 20 evaluations")
    rng = make_rng(seed)
    screen = rng.random((max(RESTARTS, budget // 4), int(free.sum())))
    cache: dict[tuple, SharpnessStats | None] = {}
    best: list = [None, None]
    used = [0]

    def full(v):
        u = np.zeros(len(space.names))
        u[free] = np.clip(v, 0.0, 1.0)
        return u

    def objective(v):
        u = full(v)
        key = tuple(np.round(u, 12))
        if key not in cache:
            if used[0] >= budget:
                raise _BudgetSpent
            used[0] += 1
            params = space.point(u)
            try:
                stats = first_tick_sharpness(space, d, params, tail_eps)
            except TicklimError:
                stats = None
            cache[key] = stats
            if stats is not None and (best[1] is None or stats.R > best[1].R):
                best[0], best[1] = params, stats
        stats = cache[key]
        return 0.0 if stats is None else -stats.R

    scores = np.array([objective(v) for v in screen])
    starts = screen[np.argsort(scores, kind="stable")[:RESTARTS]]
    for i, x0 in enumerate(starts):
        share = (budget - used[0]) // (RESTARTS - i)
        if share < 1:
            break
        try:
            minimize(objective, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(x0),
                     options={"maxfev": share, "xatol": 1e-4, "fatol": 1e-9})
        except _BudgetSpent:
            pass
    if best[1] is None:
        raise DegenerateObjective(f"all {used[0]} evaluations failed")
    _assert_bound(best[1].R, d)
    return best[0], best[1]


def _checked(space, d, params, tail_eps):
    try:
        stats = first_tick_sharpness(space, d, params, tail_eps)
    except TicklimError as exc:
        raise DegenerateObjective(f"the only evaluation failed: {exc}") from exc
    _assert_bound(stats.R, d)
    return stats


def _assert_bound(R: float, d: int) -> None:
    if R > TWO_PI_E * d * d:
        raise BoundViolation(f"R = {R:.6g} exceeds 2*pi*e*d^2 = {TWO_PI_E * d * d:.6g}")


def ensemble_information(model, d: int, max_states: int = 200_000) -> float:
    """``I(C:S)`` of the snapshot ensemble used by the proof for this model.

    When the proof's bin is finer than the step the ensemble is sampled at
    the step itself.
    """
    stats = sharpness(waiting_pdf(model))
    exact = stats.mu / (stats.R**2 * max(d, 1))
    m = max(1, math.floor(exact / model.step * (1 + 1e-12)))
    delta = m * model.step
    k = math.floor((stats.mu - max(d, 1) ** 0.25 * stats.sigma) / delta)
    if k < 1:
        k = max(1, math.floor(stats.mu / delta))
    return bp.snapshot_holevo(model, min(k, max_states), m)[0]


def _scan_cell(args):
    space, d, budget, seed = args
    params, stats = maximize_sharpness(space, d, budget, seed)
    model = space.build(d, params)
    bound = TWO_PI_E * d * d
    info = ensemble_information(model, d)
    return ScanRow(d, tuple(params[n] for n in space.names), stats.R, bound, stats.R / bound, info, seed)


def scan_dimensions(space: ParamSpace, dims, budget: int = 60, seed: int = 0, jobs: int = 1) -> list[ScanRow]:
    """One optimised row per dimension, in ascending ``d``."""
    dims = [int(d) for d in dims]
    if dims != sorted(dims):
        raise BadParameter("dimension list must be ascending")
    cells = [(space, d, budget, seed) for d in dims]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_scan_cell, cells))
    else:
        rows = [_scan_cell(c) for c in cells]
    return sorted(rows, key=lambda r: r.d)


def loglog_slope(rows) -> float:
    """Least-squares slope of log R against log d."""
    d = np.log([r.d for r in rows])
    R = np.log([r.R for r in rows])
    return float(np.polyfit(d, R, 1)[0])


def rows_to_csv(rows, names=None) -> str:
    k = len(rows[0].params) if rows else len(names or ())
    header = ["d"] + [f"param_{i + 1}" for i in range(k)] + ["R", "bound", "ratio", "I_CS_bits", "seed"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.d, *(format(p, ".17g") for p in r.params),
                    *(format(x, ".17g") for x in (r.R, r.bound, r.ratio, r.I_CS_bits)), r.seed])
    return buf.getvalue()
