"""The CSG iteration: estimate the gradient from every past sample, step, project.

Each iteration draws one fresh sample ``x_n``, stores
``(u_n, x_n, j(u_n, x_n), grad_u j(u_n, x_n))`` and forms

    G_n = sum_k alpha_k grad_u j(u_k, x_k),   u_{n+1} = clip(u_n - tau G_n),

with ``alpha`` the design-dependent cell weights from :mod:`csg.weights`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import monitor
from .history import History, ProductMetric
from .measures import BoxDomain, MeasureSpec
from .weights import CellAssignment, WeightScheme


@dataclass(frozen=True, eq=False)
class IntegralProblem:
    """``min_u J(u) = int j(u, x) mu(dx)`` over a box of designs.

    ``integrand(u, x)`` returns ``(j, grad_u j)``. The analytic pieces are
    optional and only used by diagnostics. Maximisation problems should
    negate the integrand here, at construction time.
    """

    name: str
    box: BoxDomain
    measure: MeasureSpec
    integrand: Callable
    objective: Callable | None = None
    gradient: Callable | None = None
    optimum: np.ndarray | None = None

    @property
    def design_dim(self) -> int:
        return self.box.dim

    @property
    def sample_dim(self) -> int:
        return self.measure.dim


def _check_weights(history: History, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(history),):
        raise ValueError(f"expected {len(history)} weights, got shape {w.shape}")
    return w


def estimate_gradient(history: History, weights) -> np.ndarray:
    """``sum_k alpha_k grad_u j(u_k, x_k)``."""
    w = _check_weights(history, weights)
    return np.tensordot(w, history.gradients, axes=1)


def estimate_objective(history: History, weights):
    """``sum_k alpha_k j(u_k, x_k)``; needs stored values."""
    w = _check_weights(history, weights)
    out = np.tensordot(w, history.values, axes=1)
    return float(out) if np.ndim(out) == 0 else out


def csg_step(u_n, G, tau: float, box: BoxDomain) -> np.ndarray:
    """Projected step ``clip(u_n - tau * G)`` onto ``box``."""
    if tau < 0:
        raise ValueError("step size must be nonnegative")
    return box.clip(np.asarray(u_n, dtype=float) - tau * np.asarray(G, dtype=float))


def log_schedule(iterations: int, points: int = 60) -> np.ndarray:
    """Roughly log-spaced 1-based iteration numbers, always including 1 and the last."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    raw = np.geomspace(1, iterations, num=max(points, 2))
    return np.unique(np.concatenate([[1, iterations], np.round(raw).astype(int)]))


@dataclass
class CSGConfig:
    """Settings for :func:`run_csg`.

    ``monitor`` selects the diagnostics computed at logged iterations:
    ``"none"``, ``"z"`` (both sup-estimate variants) or ``"full"`` (adds the
    running Lipschitz estimate and error bound).
    """

    tau: float = 0.5
    iterations: int = 1000
    scheme: str = "empirical"
    metric: ProductMetric | None = None
    seed: int | np.random.Generator = 0
    u0: np.ndarray | None = None
    resolution: int | None = None
    mc_samples: int = 1000
    log_at: np.ndarray | None = None
    monitor: str = "z"
    max_history: int | None = None

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.monitor not in ("none", "z", "full"):
            raise ValueError(f"unknown monitor level {self.monitor!r}")

    def weight_scheme(self) -> WeightScheme:
        return WeightScheme(self.scheme, self.resolution, self.mc_samples)


@dataclass(eq=False)
class Trajectory:
    """Everything a run produced.

    Row ``n - 1`` of ``designs``/``gradients``/``objectives`` belongs to
    iteration ``n``; ``final`` is the design after the last step.
    ``logged`` maps column names to arrays aligned with ``log_iterations``.
    """

    designs: np.ndarray
    gradients: np.ndarray
    objectives: np.ndarray
    final: np.ndarray
    log_iterations: np.ndarray
    logged: dict = field(default_factory=dict)
    history: History | None = None

    def __len__(self) -> int:
        return self.designs.shape[0]

    def rows(self):
        """Per logged iteration: dict with the export columns."""
        d = self.designs.shape[1]
        for i, n in enumerate(self.log_iterations):
            row = {"iteration": int(n)}
            for j in range(d):
                row[f"u{j}"] = float(self.designs[n - 1, j])
            row["grad_norm"] = float(np.linalg.norm(self.gradients[n - 1]))
            row["objective"] = float(self.objectives[n - 1])
            for key, vals in self.logged.items():
                row[key] = float(vals[i])
            yield row

    def to_csv(self, path) -> None:
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def run_csg(problem: IntegralProblem, config: CSGConfig,
            callback: Callable | None = None, keep_history: bool = False) -> Trajectory:
    """Run ``config.iterations`` CSG steps on ``problem``.

    ``callback(n, u_n, history, cells, G_n)`` is invoked at logged
    iterations (after the weights are formed, before the step). The run is
    deterministic given ``config.seed``; the sample for iteration ``n`` is
    drawn before any Monte-Carlo weight draws of the same iteration.
    """
    rng = _as_rng(config.seed)
    box = problem.box
    d_o, d_r = problem.design_dim, problem.sample_dim
    metric = config.metric or ProductMetric.design_sample(d_o, d_r)
    if metric.context_dim != d_o or metric.blocks[-1].dim != d_r:
        raise ValueError(f"{metric!r} does not fit a {d_o}+{d_r} dimensional problem")
    scheme = config.weight_scheme()
    if config.u0 is None:
        u = rng.uniform(box.lo, box.hi)
    else:
        u = box.clip(np.asarray(config.u0, dtype=float).reshape(d_o))

    N = config.iterations
    log_at = log_schedule(N) if config.log_at is None else np.unique(
        np.clip(np.asarray(config.log_at, dtype=int), 1, N))
    log_set = set(int(n) for n in log_at)
    hist = History(d_o, d_r, max_size=config.max_history)
    designs = np.empty((N, d_o))
    grads = np.empty((N, d_o))
    objs = np.empty(N)
    logged: dict[str, list] = {}
    tracker = monitor.LipschitzTracker(metric.blocks[0].coef, metric.sample_coef) \
        if config.monitor == "full" else None

    for n in range(1, N + 1):
        x = problem.measure.sample(rng)
        val, g = problem.integrand(u, x)
        hist.append(u, x, val, g)
        cells: CellAssignment = scheme.cells(hist, u, metric, problem.measure, rng)
        G = estimate_gradient(hist, cells.weights)
        designs[n - 1] = u
        grads[n - 1] = G
        objs[n - 1] = estimate_objective(hist, cells.weights)
        if n in log_set:
            if config.monitor != "none":
                z_paper = monitor.z_sup_estimate(hist, u, metric, "paper")
                z_loo = (monitor.z_sup_estimate(hist, u, metric, "leave-one-out")
                         if len(hist) >= 2 else np.nan)
                logged.setdefault("z_paper", []).append(z_paper)
                logged.setdefault("z_loo", []).append(z_loo)
                if tracker is not None:
                    if config.max_history is not None:
                        tracker = monitor.LipschitzTracker(tracker.c_u, tracker.c_x)
                    lip = tracker.update(hist)
                    z = z_loo if np.isfinite(z_loo) else z_paper
                    logged.setdefault("lipschitz", []).append(lip)
                    logged.setdefault("error_bound", []).append(
                        monitor.error_bound(lip, z))
            if callback is not None:
                callback(n, u, hist, cells, G)
        u = csg_step(u, G, config.tau, box)

    return Trajectory(designs, grads, objs, u, log_at,
                      {k: np.asarray(v) for k, v in logged.items()},
                      hist if keep_history else None)
