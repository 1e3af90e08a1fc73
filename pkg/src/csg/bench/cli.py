"""Command line front end: ``csg-bench {rates,paint,baseline,estimate}``.

Every flag can also come from a JSON file given with ``--config``; keys are
the flag names with dashes turned into underscores (``"c_lambda": 0.5``).
Flags given on the command line win over the file, the file wins over the
built-in defaults. Each command writes a CSV (``--out``) and a summary JSON
next to it (``<out>.summary.json``).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from ..color.paint import PAINT_BOX, PaintModel, projected_gradient
from ..measures import run_rng
from ..weights import SCHEMES
from .baseline import full_grid_baseline
from .estimate import csg_objective_estimator, mc_objective_estimator
from .paint import (PAINT_C_ETA, PAINT_C_LAMBDA, PAINT_C_U, PAINT_TAU, optimize_paint,
                    paint_config)
from .problems import parse_groups
from .rates import PROBLEMS, ExperimentConfig, run_rate_experiment

DEFAULTS = {
    "rates": dict(problem="quad", dim=1, runs=50, iters=5000, tau=0.5, weights="empirical",
                  groups=None, seed=0, c_u=1.0, c_x=1.0, resolution=None, mc_samples=1000,
                  monitor="z", jobs=1, out="rates.csv"),
    "paint": dict(mode="optimize", init=[38.0, 125.0], iters=2000, tau=PAINT_TAU,
                  c_u=PAINT_C_U, c_lambda=PAINT_C_LAMBDA, c_eta=PAINT_C_ETA,
                  weights="empirical", inner_weights="empirical", resolution=None,
                  c_l=1.0 / 20.0, seed=0, out="paint.csv"),
    "baseline": dict(grid=[2, 2, 2], starts=100, step=0.5, max_iter=3000, seed=0,
                     out="baseline.csv"),
    "estimate": dict(design=[38.0, 125.0], method="csg", evals=4000, inner_samples=40,
                     weights="exact-grid", inner_weights="exact-grid", resolution=2000,
                     inner_resolution=32, seed=0, out="estimate.csv"),
}


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csg-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON file with default values for the flags")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--out", default=S, help="CSV output path")

    p = sub.add_parser("rates", help="convergence-rate experiment on the quadratic benchmarks")
    common(p)
    p.add_argument("--problem", choices=PROBLEMS, default=S)
    p.add_argument("--dim", type=int, default=S)
    p.add_argument("--runs", type=int, default=S)
    p.add_argument("--iters", type=int, default=S)
    p.add_argument("--tau", type=float, default=S)
    p.add_argument("--weights", choices=SCHEMES, default=S)
    p.add_argument("--groups", default=S, help='coordinate groups, e.g. "5x2" or "0-1,2-4"')
    p.add_argument("--c-u", type=float, default=S)
    p.add_argument("--c-x", type=float, default=S)
    p.add_argument("--resolution", type=int, default=S)
    p.add_argument("--mc-samples", type=int, default=S)
    p.add_argument("--monitor", choices=("none", "z"), default=S,
                   help="'none' skips the Z_n sup estimates (faster)")
    p.add_argument("--jobs", type=int, default=S)

    p = sub.add_parser("paint", help="optimise or evaluate a paint design")
    common(p)
    p.add_argument("--mode", choices=("optimize", "evaluate"), default=S)
    p.add_argument("--init", type=_floats, default=S, help="design R,d in nm")
    p.add_argument("--iters", type=int, default=S)
    p.add_argument("--tau", type=float, default=S)
    p.add_argument("--c-u", type=float, default=S)
    p.add_argument("--c-lambda", type=float, default=S)
    p.add_argument("--c-eta", type=float, default=S)
    p.add_argument("--c-l", type=float, default=S, help="lightness weight; c_a = 1 - c_l")
    p.add_argument("--weights", choices=SCHEMES, default=S, help="wavelength weights")
    p.add_argument("--inner-weights", choices=SCHEMES, default=S, help="size weights")
    p.add_argument("--resolution", type=int, default=S)

    p = sub.add_parser("baseline", help="full-gradient descent on a fixed paint quadrature")
    common(p)
    p.add_argument("--grid", type=_ints, default=S, help="n_lambda,n_R,n_d")
    p.add_argument("--starts", type=int, default=S)
    p.add_argument("--step", type=float, default=S)
    p.add_argument("--max-iter", type=int, default=S)

    p = sub.add_parser("estimate", help="objective estimate at a fixed paint design")
    common(p)
    p.add_argument("--design", type=_floats, default=S, help="design R,d in nm")
    p.add_argument("--method", choices=("csg", "mc"), default=S)
    p.add_argument("--evals", type=int, default=S)
    p.add_argument("--inner-samples", type=int, default=S, help="MC inner draws per outer draw")
    p.add_argument("--weights", choices=SCHEMES, default=S, help="CSG wavelength weights")
    p.add_argument("--inner-weights", choices=SCHEMES, default=S, help="CSG size weights")
    p.add_argument("--resolution", type=int, default=S, help="wavelength grid cells")
    p.add_argument("--inner-resolution", type=int, default=S, help="size grid cells per axis")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional config file and the explicit flags."""
    opts = dict(DEFAULTS[args.command])
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(data) - set(opts)
        if unknown:
            raise ValueError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        opts.update(data)
    opts.update(given)
    return opts


def _write_rows(path, rows) -> None:
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _summary_path(out) -> Path:
    return Path(out).with_suffix(".summary.json")


def _write_summary(out, summary: dict) -> None:
    _summary_path(out).write_text(json.dumps(summary, indent=2, default=_jsonable))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def predicted_slope(problem: str, dim: int, groups=None) -> float:
    """Rate exponent ``-1/max(2, d_r)`` with ``d_r`` the largest integration block."""
    if problem == "aniso":
        d_r = 1
    elif groups is not None:
        d_r = max(len(g) for g in parse_groups(groups, dim))
    else:
        d_r = dim
    return -1.0 / max(2, d_r)


def rate_checks(fits: dict, predicted: float) -> dict:
    """Pass/fail of the fitted slopes against the predicted exponent.

    A slope passes when it lies in ``[1.4 p, 0.7 p]`` for predicted ``p``
    (i.e. not much slower, and not implausibly faster, than predicted).
    """
    checks = {}
    for name in ("error", "z_loo"):
        if name in fits:
            s = fits[name].slope
            checks[f"{name}_slope"] = bool(1.4 * predicted <= s <= 0.7 * predicted)
    return checks


def cmd_rates(o: dict) -> dict:
    cfg = ExperimentConfig(problem=o["problem"], dim=o["dim"], tau=o["tau"],
                           iterations=o["iters"], runs=o["runs"], seed=o["seed"],
                           weights=o["weights"], c_u=o["c_u"], c_x=o["c_x"],
                           groups=o["groups"], resolution=o["resolution"],
                           mc_samples=o["mc_samples"], monitor=o["monitor"])
    report = run_rate_experiment(cfg, n_jobs=o["jobs"])
    report.write(o["out"])
    summary = report.summary()
    pred = predicted_slope(o["problem"], o["dim"], o["groups"])
    summary["predicted_slope"] = pred
    summary["checks"] = rate_checks(report.fits, pred)
    _write_summary(o["out"], summary)
    return summary


def _paint_model(o) -> PaintModel:
    return PaintModel(c_L=o["c_l"], c_a=1.0 - o["c_l"])


def cmd_paint(o: dict) -> dict:
    model = _paint_model(o)
    u0 = np.asarray(o["init"], dtype=float)
    if u0.shape != (2,):
        raise ValueError("a paint design has two entries: R,d")
    if o["mode"] == "evaluate":
        J, g, xyz = model.reference(u0)
        L, a, b = model.lab(xyz)
        row = {"R": u0[0], "d": u0[1], "objective": J, "grad_R": g[0], "grad_d": g[1],
               "X": xyz[0], "Y": xyz[1], "Z": xyz[2], "L": L, "a": a, "b": b}
        _write_rows(o["out"], [row])
        summary = {"config": o, "reference": row,
                   "projected_gradient_norm": float(np.linalg.norm(projected_gradient(u0, g)))}
    else:
        cfg = paint_config(iterations=o["iters"], tau=o["tau"], u0=u0, seed=o["seed"],
                           c_u=o["c_u"], c_lambda=o["c_lambda"], c_eta=o["c_eta"],
                           scheme=o["weights"], inner_scheme=o["inner_weights"],
                           resolution=o["resolution"], monitor="z")
        run = optimize_paint(model, cfg)
        run.trajectory.to_csv(o["out"])
        summary = {"config": o, "final": run.final,
                   "reference_objective": run.reference_objective,
                   "reference_gradient_norm": run.reference_gradient_norm,
                   "checks": {"stationary": bool(run.reference_gradient_norm < 0.05)}}
    _write_summary(o["out"], summary)
    return summary


def cmd_baseline(o: dict) -> dict:
    rng = np.random.default_rng(o["seed"])
    starts = rng.uniform(PAINT_BOX.lo, PAINT_BOX.hi, size=(o["starts"], 2))
    res = full_grid_baseline(PaintModel(), o["grid"], starts, step=o["step"],
                             max_iter=o["max_iter"])
    _write_rows(o["out"], res.rows())
    wrong = res.wrong_designs()
    summary = {"config": o, "converged": int(res.converged.sum()),
               "wrong_designs": int(wrong.sum()),
               "wrong_fraction": float(wrong.mean()),
               "checks": {"artifact_found": bool(wrong.any())}}
    _write_summary(o["out"], summary)
    return summary


def cmd_estimate(o: dict) -> dict:
    model = PaintModel()
    u = np.asarray(o["design"], dtype=float)
    if u.shape != (2,):
        raise ValueError("a paint design has two entries: R,d")
    problem = model.objective()
    ref = float(model.reference(u)[0])
    if o["method"] == "mc":
        series = mc_objective_estimator(problem, u, o["evals"], run_rng(o["seed"], 0),
                                        inner_samples=o["inner_samples"])
    else:
        cfg = paint_config(seed=run_rng(o["seed"], 0), scheme=o["weights"],
                           inner_scheme=o["inner_weights"], resolution=o["resolution"],
                           inner_resolution=o["inner_resolution"])
        series = csg_objective_estimator(problem, u, o["evals"], cfg)
    rel = np.abs(series.estimates - ref) / abs(ref)
    _write_rows(o["out"], ({"evaluations": int(e), "estimate": float(v), "rel_error": float(r)}
                           for e, v, r in zip(series.evaluations, series.estimates, rel)))
    reached = series.evaluations_to(ref)
    summary = {"config": o, "reference": ref, "final_estimate": float(series.estimates[-1]),
               "evaluations_to_1pct": None if not np.isfinite(reached) else reached,
               "checks": {"reached_1pct": bool(np.isfinite(reached))}}
    _write_summary(o["out"], summary)
    return summary


COMMANDS = {"rates": cmd_rates, "paint": cmd_paint, "baseline": cmd_baseline,
            "estimate": cmd_estimate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        t0 = time.perf_counter()
        summary = COMMANDS[args.command](opts)
    except (ValueError, OSError) as exc:
        parser.exit(2, f"csg-bench {args.command}: error: {exc}\n")
    checks = summary.get("checks", {})
    status = ", ".join(f"{k}={'pass' if v else 'fail'}" for k, v in checks.items())
    print(f"{args.command}: wrote {opts['out']} and {_summary_path(opts['out'])} "
          f"in {time.perf_counter() - t0:.1f} s" + (f" [{status}]" if status else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
