"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure,
4 a bound inequality was violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bound_pipeline as bp
from . import generator as gen
from . import infotheory as it
from . import optimize as opt
from .clock_zoo import FAMILIES
from .errors import BoundViolation, TicklimError
from .svgplot import Series, line_plot

log = logging.getLogger("ticklim")

FAMILY_PARAMS = {
    "poisson": ("rate",),
    "ladder": ("q",),
    "quasi-ideal": ("width", "gamma", "travel"),
    "random": ("w",),
}
NEEDS_D = {"ladder", "quasi-ideal", "random"}


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("TICKLIM_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


# ------------------------------------------------------------------ models


def build_model(args):
    """Model from ``--model`` or ``--family`` plus family parameters."""
    if bool(args.family) == bool(args.model):
        raise UsageError("give exactly one of --family or --model")
    if args.model:
        return gen.load_model(args.model)
    fam = args.family
    if fam in NEEDS_D and args.d is None:
        raise UsageError(f"--d is required for the {fam} family")
    kw = {n: getattr(args, n) for n in FAMILY_PARAMS[fam] if getattr(args, n) is not None}
    if args.step is not None:
        kw["delta"] = args.step
    if fam == "random":
        kw["seed"] = args.seed
    d = args.d if args.d is not None else 1
    return FAMILIES[fam](d, **kw)


def _rebuild(args):
    """Re-simulation hook for families defined in continuous time."""
    if args.model or args.family not in ("poisson", "quasi-ideal"):
        return None

    def rebuild(step):
        ns = argparse.Namespace(**vars(args))
        ns.step = step
        return build_model(ns)

    return rebuild


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _f(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _stats_dict(stats) -> dict:
    return {"mu": _f(stats.mu), "sigma2": _f(stats.sigma2), "R": _f(stats.R),
            "tail_error": _f(stats.tail_error)}


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    model = build_model(args)
    pdf = gen.waiting_pdf(model, args.tail_eps)
    stats = gen.sharpness(pdf)
    summary = {"dim": model.dim, "step": _f(model.step), "k_max": pdf.k_max,
               "tail": _f(pdf.tail), **_stats_dict(stats)}
    if args.save_model:
        gen.save_model(model, args.save_model)
    fmt = args.format or "json"
    if fmt == "json":
        _write(_dumps(summary), args.out)
        return 0
    surv = pdf.survival()[1:]
    t = pdf.times()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "t", "p", "survival"])
        for k in range(pdf.k_max):
            w.writerow([k + 1, format(t[k], ".17g"), format(pdf.probs[k], ".17g"), format(surv[k], ".17g")])
        _write(buf.getvalue(), args.out)
    else:
        svg = line_plot([Series("p(t)/step", t, np.asarray(pdf.probs) / model.step)],
                        title=f"waiting-time density, R = {stats.R:.4g}", xlabel="t", ylabel="density")
        _write(svg, args.out)
    sys.stderr.write(_dumps(summary))
    return 0


def _audit_report(path) -> int:
    data = json.loads(Path(path).read_text())
    bad = [c for c in data.get("checks", [])
           if not c.get("pass", False) or (c.get("margin") is not None and c["margin"] < -bp.MARGIN_TOL)]
    for c in bad:
        log.error("violated: %s (margin %s)", c.get("name"), c.get("margin"))
    return 4 if bad else 0


def cmd_verify_bound(args) -> int:
    if args.report:
        return _audit_report(args.report)
    model = build_model(args)
    d = args.d if args.d is not None else model.dim
    report = bp.verify_chain(model, d, args.tail_eps, rebuild=_rebuild(args))
    _write(report.to_json(), args.out)
    if not report.passed:
        for c in report.failures():
            log.error("violated: %s lhs=%r rhs=%r margin=%r", c.name, c.lhs, c.rhs, c.margin)
        return 4
    return 0


def cmd_dctrl(args) -> int:
    model = build_model(args)
    n = args.snapshots
    if n < 1:
        raise UsageError("--snapshots must be >= 1")
    stats = gen.sharpness(gen.waiting_pdf(model, args.tail_eps))
    span = stats.mu / model.step
    results = []
    for count in sorted({max(1, n // 2), n}):
        stride = max(1, int(span // count))
        ens = gen.conditional_trajectory(model, count - 1, stride) if count > 1 else \
            gen.conditional_trajectory(model, 1, stride).head(1)
        q, dc = it.dctrl_blahut_arimoto(ens.states, tol=args.ba_tol)
        results.append({"snapshots": len(ens), "stride": stride, "d_ctrl": _f(dc),
                        "weights": [_f(x) for x in q]})
    best = results[-1]
    dc = best["d_ctrl"]
    rhs = it.TWO_PI_E * dc * dc
    check = {"name": "sharpness_vs_controllable_dimension", "lhs": _f(stats.R), "rhs": _f(rhs),
             "margin": _f(rhs - stats.R), "pass": bool(stats.R <= rhs)}
    out = {"R": _f(stats.R), "d_ctrl": dc, "weights": best["weights"], "snapshots": best["snapshots"],
           "stride": best["stride"], "density_convergence": results, "check": check}
    _write(_dumps(out), args.out)
    return 0 if check["pass"] else 4


def _parse_dims(text) -> list[int]:
    try:
        dims = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --dims {text!r}") from exc
    if not dims or any(d < 1 for d in dims):
        raise UsageError("--dims needs positive integers")
    return sorted(set(dims))


def _space(args, d):
    if not args.family:
        raise UsageError("--family is required")
    return opt.default_space(args.family, d)


def cmd_scan(args) -> int:
    if not args.dims:
        raise UsageError("--dims is required")
    dims = _parse_dims(args.dims)
    space = _space(args, max(dims))
    if args.family == "quasi-ideal":
        # width box must fit the smallest dimension
        space = opt.ParamSpace(space.names, space.lower,
                               (math.sqrt(min(dims)),) + space.upper[1:], space.family)
    rows = opt.scan_dimensions(space, dims, args.budget, args.seed, args.jobs)
    slope = opt.loglog_slope(rows) if len(rows) > 1 else None
    if slope is not None:
        log.info("log R vs log d slope: %.6f", slope)
    fmt = args.format or "csv"
    if fmt == "csv":
        _write(opt.rows_to_csv(rows), args.out)
    elif fmt == "json":
        _write(_dumps({"family": args.family, "names": list(space.names), "slope": _f(slope) if slope else None,
                       "rows": [{"d": r.d, "params": [_f(p) for p in r.params], "R": _f(r.R),
                                 "bound": _f(r.bound), "ratio": _f(r.ratio), "I_CS_bits": _f(r.I_CS_bits),
                                 "seed": r.seed} for r in rows]}), args.out)
    else:
        ds = np.array([r.d for r in rows], dtype=float)
        svg = line_plot([Series("best R", ds, np.array([r.R for r in rows])),
                         Series("2 pi e d^2", ds, np.array([r.bound for r in rows]), dashed=True),
                         Series("d", ds, ds, dashed=True)],
                        title=f"{args.family}: sharpness vs dimension", xlabel="d", ylabel="R",
                        logx=True, logy=True)
        _write(svg, args.out)
    if any(r.ratio > 1 for r in rows):
        return 4
    return 0


def cmd_optimize(args) -> int:
    if args.d is None:
        raise UsageError("--d is required")
    space = _space(args, args.d)
    params, stats = opt.maximize_sharpness(space, args.d, args.budget, args.seed)
    bound = it.TWO_PI_E * args.d**2
    out = {"family": args.family, "d": args.d, "params": {k: _f(v) for k, v in params.items()},
           **_stats_dict(stats), "bound": _f(bound), "ratio": _f(stats.R / bound), "seed": args.seed}
    _write(_dumps(out), args.out)
    return 0


MAXENT_GRID = [(5, 1.0), (6, 1.2), (8, 1.0), (8, 2.0), (10, 1.5), (10, 2.5), (12, 3.0), (14, 2.0),
               (16, 1.0), (16, 4.0), (18, 3.0), (20, 2.0), (20, 5.0), (22, 4.5), (24, 1.5), (24, 6.0),
               (26, 3.5), (28, 7.0), (30, 1.0), (30, 7.5)]


def maxent_rows(points, starts: int, seed: int) -> list[dict]:
    rows = []
    for n, sigma in points:
        res = it.max_entropy_search(n, sigma, starts, seed)
        bound = it.max_entropy_value(res.achieved_sigma)
        rows.append({"support": n, "sigma": _f(sigma), "achieved_sigma": _f(res.achieved_sigma),
                     "entropy_bits": _f(res.entropy_bits), "gibbs_bits": _f(it.gibbs_max_entropy(n, sigma)),
                     "bound_bits": _f(bound), "margin": _f(bound - res.entropy_bits),
                     "pass": bool(res.entropy_bits <= bound + 1e-6)})
    return rows


def cmd_maxent_check(args) -> int:
    if (args.support is None) != (args.sigma is None):
        raise UsageError("give both --support and --sigma, or neither for the full grid")
    points = MAXENT_GRID if args.support is None else [(args.support, args.sigma)]
    rows = maxent_rows(points, args.starts, args.seed)
    _write(_dumps({"rows": rows, "pass": all(r["pass"] for r in rows)}), args.out)
    return 0 if all(r["pass"] for r in rows) else 4


# ------------------------------------------------------------------ parser


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", choices=sorted(FAMILIES))
    common.add_argument("--model", help="model JSON file")
    common.add_argument("--d", type=int)
    common.add_argument("--step", type=float)
    common.add_argument("--tail-eps", type=float, default=1e-12)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json", "svg"))
    common.add_argument("--jobs", type=int, default=1)
    for name in ("rate", "q", "width", "gamma", "travel", "w"):
        common.add_argument(f"--{name}", type=float)

    p = argparse.ArgumentParser(prog="ticklim", description="Tick-sharpness limits of finite-dimensional clocks.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="first-tick pdf and sharpness")
    s.add_argument("--save-model")
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("verify-bound", parents=[common], help="replay the proof chain")
    s.add_argument("--report", help="audit an existing report JSON instead")
    s.set_defaults(func=cmd_verify_bound)
    s = sub.add_parser("dctrl", parents=[common], help="controllable dimension")
    s.add_argument("--snapshots", type=int, default=16)
    s.add_argument("--ba-tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_dctrl)
    s = sub.add_parser("scan", parents=[common], help="optimised sharpness across dimensions")
    s.add_argument("--dims")
    s.add_argument("--budget", type=int, default=60)
    s.set_defaults(func=cmd_scan)
    s = sub.add_parser("optimize", parents=[common], help="maximise sharpness at one dimension")
    s.add_argument("--budget", type=int, default=60)
    s.set_defaults(func=cmd_optimize)
    s = sub.add_parser("maxent-check", parents=[common], help="brute-force the discrete max-entropy bound")
    s.add_argument("--support", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--starts", type=int, default=8)
    s.set_defaults(func=cmd_maxent_check)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"ticklim: error: {exc}\n")
        return 2
    except BoundViolation as exc:
        sys.stderr.write(f"ticklim: bound violated: {exc}\n")
        return 4
    except TicklimError as exc:
        sys.stderr.write(f"ticklim: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"ticklim: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
