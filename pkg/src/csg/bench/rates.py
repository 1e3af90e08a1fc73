"""Convergence-rate experiments: many seeded runs, medians, log-log slopes."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..composite import run_sum
from ..core import CSGConfig, run_csg
from ..history import ProductMetric
from ..measures import run_rng
from .problems import anisotropic_problem, parse_groups, quadratic_problem, quadratic_split

PROBLEMS = ("quad", "aniso")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    n_lo: int
    n_hi: int
    residual: float


def window_points(n_max: int, frac: float = 0.8, points: int = 40) -> np.ndarray:
    """Log-spaced iteration numbers covering the last ``frac`` of ``1..n_max``."""
    lo = max(1, int(np.ceil((1.0 - frac) * n_max)))
    return np.unique(np.round(np.geomspace(lo, n_max, points)).astype(int))


def fit_rate(values, n=None, window=None) -> RateFit:
    """Least-squares slope of ``log(value)`` against ``log(n)``.

    Parameters
    ----------
    values : array
        Series values; ``n`` gives their iteration numbers (default 1, 2, ...).
    window : (n_lo, n_hi), optional
        Inclusive range of ``n`` to fit. Defaults to the last 80 % of the
        series, thinned to roughly log-spaced points so late iterations do
        not dominate.
    """
    values = np.asarray(values, dtype=float)
    n = np.arange(1, values.size + 1) if n is None else np.asarray(n, dtype=float)
    if n.shape != values.shape:
        raise ValueError("values and n differ in length")
    if window is None:
        wanted = window_points(int(n.max()))
        idx = np.unique(np.searchsorted(n, wanted).clip(0, n.size - 1))
        n_lo, n_hi = int(n[idx[0]]), int(n[idx[-1]])
    else:
        n_lo, n_hi = window
        idx = np.flatnonzero((n >= n_lo) & (n <= n_hi))
    if idx.size < 10:
        raise ValueError(f"fit window holds {idx.size} points; need at least 10")
    inside = (n >= n_lo) & (n <= n_hi)
    if np.any(~(values[inside] > 0)):
        raise ValueError("series must be positive on the fit window")
    v = values[idx]
    x, y = np.log(n[idx]), np.log(v)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return RateFit(float(coef[0]), float(coef[1]), int(n_lo), int(n_hi), resid)


@dataclass
class ExperimentConfig:
    problem: str = "quad"
    dim: int = 1
    tau: float = 0.5
    iterations: int = 5000
    runs: int = 50
    seed: int = 0
    weights: str = "empirical"
    c_u: float = 1.0
    c_x: float = 1.0
    groups: object = None
    resolution: int | None = None
    mc_samples: int = 1000
    log_points: int = 200
    monitor: str = "z"
    out: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; use one of {PROBLEMS}")
        if self.tau < 0 or self.iterations < 1 or self.runs < 1:
            raise ValueError("need tau >= 0, iterations >= 1, runs >= 1")
        if self.groups is not None and self.problem != "quad":
            raise ValueError("groups are only supported for the quadratic problem")
        if self.monitor not in ("none", "z"):
            raise ValueError("monitor must be 'none' or 'z'")


@dataclass
class RateReport:
    config: ExperimentConfig
    iterations: np.ndarray          # logged iteration numbers
    medians: dict                   # name -> median over runs at ``iterations``
    fits: dict                      # name -> RateFit
    per_run_final: dict = field(default_factory=dict)

    def summary(self) -> dict:
        cfg = asdict(self.config)
        return {"config": cfg,
                "fits": {k: asdict(v) for k, v in self.fits.items()},
                "final_medians": {k: float(v[-1]) for k, v in self.medians.items()}}

    def write(self, path) -> tuple[Path, Path]:
        path = Path(path)
        names = list(self.medians)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration"] + [f"median_{k}" for k in names])
            for i, n in enumerate(self.iterations):
                w.writerow([int(n)] + [repr(float(self.medians[k][i])) for k in names])
        spath = path.with_suffix(".summary.json")
        spath.write_text(json.dumps(self.summary(), indent=2))
        return path, spath


def _single_run(cfg: ExperimentConfig, run_index: int, log_at: np.ndarray) -> dict:
    rng = run_rng(cfg.seed, run_index)
    base = dict(tau=cfg.tau, iterations=cfg.iterations, scheme=cfg.weights, seed=rng,
                resolution=cfg.resolution, mc_samples=cfg.mc_samples, log_at=log_at,
                monitor=cfg.monitor)
    if cfg.groups is not None:
        groups = parse_groups(cfg.groups, cfg.dim)
        traj = run_sum(quadratic_split(cfg.dim, groups), CSGConfig(**base))
        z = {}
        if cfg.monitor != "none":
            zs = np.stack([traj.logged[f"z_g{i}"] for i in range(len(groups))])
            z = {"z_loo": zs.max(axis=0)}
        grad_true = traj.designs[log_at - 1]
    else:
        problem = (quadratic_problem(cfg.dim) if cfg.problem == "quad"
                   else anisotropic_problem(cfg.dim))
        metric = ProductMetric.design_sample(problem.design_dim, problem.sample_dim,
                                             cfg.c_u, cfg.c_x)
        traj = run_csg(problem, CSGConfig(metric=metric, **base))
        z = ({} if cfg.monitor == "none" else
             {"z_paper": traj.logged["z_paper"], "z_loo": traj.logged["z_loo"]})
        grad_true = np.stack([problem.gradient(u) for u in traj.designs[log_at - 1]])
    out = {"error": np.linalg.norm(traj.designs[log_at - 1], axis=1),
           "grad_error": np.linalg.norm(traj.gradients[log_at - 1] - grad_true, axis=1)}
    out.update(z)
    return out


def run_rate_experiment(config: ExperimentConfig, n_jobs: int = 1) -> RateReport:
    """Run ``config.runs`` seeded runs and fit slopes to the per-iteration medians.

    Tracked: ``error`` = |u_n - u*| (u* = 0), ``grad_error`` =
    |G_n - grad J(u_n)|, and the sup-estimates of ``Z_n`` (``z_loo``; for
    unsplit runs also ``z_paper``), the latter only with ``monitor="z"``.
    Run ``r`` uses the stream derived from ``(config.seed, r)``, so results
    do not depend on ``n_jobs``.
    """
    N = config.iterations
    log_at = np.unique(np.concatenate([
        np.round(np.geomspace(1, N, config.log_points)).astype(int),
        window_points(N)]))
    if n_jobs == 1:
        results = [_single_run(config, r, log_at) for r in range(config.runs)]
    else:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(n_jobs) as pool:
            results = list(pool.map(_single_run, [config] * config.runs,
                                    range(config.runs), [log_at] * config.runs))
    medians = {k: np.median(np.stack([r[k] for r in results]), axis=0) for k in results[0]}
    fits = {}
    for k, v in medians.items():
        ok = np.isfinite(v) & (v > 0)
        try:
            fits[k] = fit_rate(v[ok], log_at[ok])
        except ValueError:
            pass
    finals = {k: np.array([r[k][-1] for r in results]) for k in results[0]}
    report = RateReport(config, log_at, medians, fits, finals)
    if config.out:
        report.write(config.out)
    return report
