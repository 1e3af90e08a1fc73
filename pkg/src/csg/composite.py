"""Nested objectives and sums of independent integrals.

A nested objective has the form

    J(u) = Phi( int f1(u, x1, int f2(u, x1, x2) mu2(dx2)) mu1(dx1) ).

Every iteration draws one ``x1`` and one ``x2``. The inner integral at the
current ``(u_n, x1_n)`` is estimated with its own weights ``alpha`` over
the inner history, then frozen into a snapshot together with the outer
partials. The outer weights ``beta`` combine the snapshots into the
pre-transform value ``W`` and its design Jacobian, and ``Phi`` is applied
last by the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import monitor
from .core import CSGConfig, Trajectory, _as_rng, csg_step, log_schedule
from .history import Block, History, ProductMetric
from .measures import BoxDomain, MeasureSpec
from .weights import WeightScheme


def identity_transform(w):
    w = np.asarray(w, dtype=float)
    if w.shape != (1,):
        raise ValueError("identity transform needs a one-component value")
    return float(w[0]), np.ones(1)


@dataclass(frozen=True, eq=False)
class NestedObjective:
    """Two integral levels plus a final pointwise transform.

    Parameters
    ----------
    inner : callable or None
        ``inner(u, x1, x2) -> (value (m,), jacobian (m, d_u))``. ``None``
        drops the inner level; ``outer`` then receives ``v=None``.
    outer : callable
        ``outer(u, x1, v) -> (value (k,), d_u (k, d_u), d_v (k, m) or None)``.
    transform : callable
        ``transform(w) -> (scalar, gradient (k,))``.
    """

    box: BoxDomain
    outer_measure: MeasureSpec
    outer: Callable
    inner_measure: MeasureSpec | None = None
    inner: Callable | None = None
    transform: Callable = identity_transform
    name: str = "nested"

    def __post_init__(self):
        if (self.inner is None) != (self.inner_measure is None):
            raise ValueError("inner integrand and inner measure go together")

    @property
    def design_dim(self) -> int:
        return self.box.dim

    @property
    def nested(self) -> bool:
        return self.inner is not None


@dataclass(frozen=True, eq=False)
class StageSnapshot:
    """Inner estimates and outer partials as they stood at one iteration."""

    f_hat: np.ndarray | None
    g_hat: np.ndarray | None
    outer_value: np.ndarray
    d_design: np.ndarray
    d_inner: np.ndarray | None

    @property
    def total_jacobian(self) -> np.ndarray:
        """``d_u f1 + d_v f1 . g_hat`` for this snapshot."""
        if self.d_inner is None or self.g_hat is None:
            return self.d_design
        return self.d_design + self.d_inner @ self.g_hat


def nested_metrics(design_dim: int, outer_dim: int, inner_dim: int | None,
                   c_u: float = 1.0, c_outer: float = 1.0,
                   c_inner: float = 1.0) -> tuple[ProductMetric, ProductMetric | None]:
    """Metrics for the outer weights ``(u | x1)`` and inner weights ``(u, x1 | x2)``."""
    outer = ProductMetric([Block("u", design_dim, c_u), Block("x1", outer_dim, c_outer)])
    if inner_dim is None:
        return outer, None
    inner = ProductMetric([Block("u", design_dim, c_u), Block("x1", outer_dim, c_outer),
                           Block("x2", inner_dim, c_inner)])
    return outer, inner


def inner_estimates(history: History, u_n, x1_n, metric: ProductMetric,
                    scheme: WeightScheme, measure=None, rng=None):
    """Weighted inner value and Jacobian at the context ``(u_n, x1_n)``."""
    ctx = np.concatenate([np.ravel(u_n), np.ravel(x1_n)])
    w = scheme.weights(history, ctx, metric, measure, rng)
    f_hat = np.tensordot(w, history.values, axes=1)
    g_hat = np.tensordot(w, history.gradients, axes=1)
    return f_hat, g_hat


def outer_assemble(history: History, u_n, metric: ProductMetric,
                   scheme: WeightScheme, measure=None, rng=None):
    """``(W_n, G_raw_n)`` from the snapshot-carrying outer history."""
    if len(history) and history.snapshots[-1] is None:
        raise LookupError("outer history records lack snapshots")
    w = scheme.weights(history, u_n, metric, measure, rng)
    W = np.tensordot(w, history.values, axes=1)
    G_raw = np.tensordot(w, history.gradients, axes=1)
    return W, G_raw


def final_chain(transform: Callable, W, G_raw):
    """``(Phi(W), grad Phi(W) . G_raw)``."""
    J, dphi = transform(np.asarray(W, dtype=float))
    return float(J), np.asarray(dphi, dtype=float) @ np.asarray(G_raw, dtype=float)


@dataclass
class NestedConfig(CSGConfig):
    """:class:`CSGConfig` plus the inner-level knobs.

    ``scheme``/``resolution`` apply to the outer weights, ``inner_scheme``/
    ``inner_resolution`` to the inner ones; ``metric`` is ignored in favour
    of the three block coefficients.
    """

    inner_scheme: str = "empirical"
    inner_resolution: int | None = None
    c_u: float = 1.0
    c_outer: float = 1.0
    c_inner: float = 1.0


class NestedRun:
    """Iteration state of a nested CSG run; :func:`run_nested` drives it.

    Exposed separately so estimators (``tau = 0``) and tests can step
    through iterations and inspect the histories.
    """

    def __init__(self, problem: NestedObjective, config: NestedConfig):
        self.problem = problem
        self.config = config
        self.rng = _as_rng(config.seed)
        d_o = problem.design_dim
        p1 = problem.outer_measure.dim
        p2 = problem.inner_measure.dim if problem.nested else None
        self.outer_metric, self.inner_metric = nested_metrics(
            d_o, p1, p2, config.c_u, config.c_outer, config.c_inner)
        self.outer_scheme = config.weight_scheme()
        self.inner_scheme = WeightScheme(config.inner_scheme, config.inner_resolution,
                                         config.mc_samples)
        self.outer_history = History(d_o, p1, max_size=config.max_history)
        self.inner_history = (History(d_o + p1, p2, max_size=config.max_history,
                                      gradient_dim=d_o) if problem.nested else None)
        box = problem.box
        if config.u0 is None:
            self.u = self.rng.uniform(box.lo, box.hi)
        else:
            self.u = box.clip(np.asarray(config.u0, dtype=float).reshape(d_o))
        self.evaluations = 0

    def step(self):
        """One iteration; returns ``(u_n, J_hat_n, G_hat_n, W_n)``."""
        pb, rng, u = self.problem, self.rng, self.u
        x1 = pb.outer_measure.sample(rng)
        f_hat = g_hat = None
        if pb.nested:
            x2 = pb.inner_measure.sample(rng)
            val2, jac2 = pb.inner(u, x1, x2)
            ctx = np.concatenate([u, np.ravel(x1)])
            self.inner_history.append(ctx, x2, val2, jac2)
            f_hat, g_hat = inner_estimates(self.inner_history, u, x1, self.inner_metric,
                                           self.inner_scheme, pb.inner_measure, rng)
            self.evaluations += 1
        val1, d_u, d_v = pb.outer(u, x1, f_hat)
        snap = StageSnapshot(f_hat, g_hat, np.asarray(val1, dtype=float),
                             np.asarray(d_u, dtype=float),
                             None if d_v is None else np.asarray(d_v, dtype=float))
        self.evaluations += 1
        self.outer_history.append(u, x1, snap.outer_value, snap.total_jacobian, snap)
        W, G_raw = outer_assemble(self.outer_history, u, self.outer_metric,
                                  self.outer_scheme, pb.outer_measure, rng)
        J, G = final_chain(pb.transform, W, G_raw)
        self.u = csg_step(u, G, self.config.tau, pb.box)
        return u, J, G, W


def run_nested(problem: NestedObjective, config: NestedConfig,
               callback: Callable | None = None) -> Trajectory:
    """CSG on a nested objective; mirrors :func:`csg.core.run_csg`.

    Logged columns: ``z_outer`` and (nested only) ``z_inner``, both the
    leave-one-out sup estimates of their level, when ``config.monitor`` is
    not ``"none"``.
    """
    run = NestedRun(problem, config)
    N = config.iterations
    log_at = log_schedule(N) if config.log_at is None else np.unique(
        np.clip(np.asarray(config.log_at, dtype=int), 1, N))
    log_set = set(int(n) for n in log_at)
    d_o = problem.design_dim
    designs = np.empty((N, d_o))
    grads = np.empty((N, d_o))
    objs = np.empty(N)
    logged: dict[str, list] = {}
    for n in range(1, N + 1):
        u, J, G, W = run.step()
        designs[n - 1], grads[n - 1], objs[n - 1] = u, G, J
        if n in log_set:
            if config.monitor != "none" and n >= 2:
                logged.setdefault("z_outer", []).append(monitor.z_sup_estimate(
                    run.outer_history, u, run.outer_metric))
                if problem.nested:
                    ctx = np.concatenate([u, run.outer_history.points[-1]])
                    logged.setdefault("z_inner", []).append(monitor.z_sup_estimate(
                        run.inner_history, ctx, run.inner_metric))
            elif config.monitor != "none":
                logged.setdefault("z_outer", []).append(np.nan)
                if problem.nested:
                    logged.setdefault("z_inner", []).append(np.nan)
            if callback is not None:
                callback(n, u, run, W, G)
    return Trajectory(designs, grads, objs, run.u, log_at,
                      {k: np.asarray(v) for k, v in logged.items()})


# -- sums of independent integrals -------------------------------------------

@dataclass(frozen=True, eq=False)
class IntegralGroup:
    """One summand ``int j_G(u, x_G) mu_G(dx_G)``.

    ``integrand(u, x_G) -> (value, gradient (d_u,))``. With
    ``design_coords`` set, only those design coordinates enter the weight
    metric (useful when ``j_G`` depends on them alone).
    """

    coords: tuple
    measure: MeasureSpec
    integrand: Callable
    design_coords: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if self.design_coords is not None:
            object.__setattr__(self, "design_coords",
                               tuple(int(c) for c in self.design_coords))
        if len(self.coords) != self.measure.dim:
            raise ValueError("group coordinates and measure dimension differ")


@dataclass(frozen=True, eq=False)
class SumOfIntegrals:
    box: BoxDomain
    groups: tuple
    sample_dim: int | None = None
    name: str = "sum"

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ValueError("need at least one group")
        seen: set[int] = set()
        for g in self.groups:
            if seen.intersection(g.coords):
                raise ValueError(f"groups overlap on {sorted(seen.intersection(g.coords))}")
            seen.update(g.coords)
        total = self.sample_dim if self.sample_dim is not None else len(seen)
        if seen != set(range(total)):
            raise ValueError("groups must partition the integration coordinates")

    @property
    def design_dim(self) -> int:
        return self.box.dim


def _group_design(group: IntegralGroup, u):
    return u if group.design_coords is None else u[list(group.design_coords)]


class _GroupState:
    def __init__(self, group: IntegralGroup, d_o: int, config: CSGConfig):
        self.group = group
        du = d_o if group.design_coords is None else len(group.design_coords)
        self.metric = ProductMetric.design_sample(du, group.measure.dim)
        self.history = History(du, group.measure.dim, max_size=config.max_history,
                               gradient_dim=d_o)
        self.scheme = config.weight_scheme()


def sum_estimate(states: Sequence[_GroupState], u_n, rng) -> tuple[float, np.ndarray]:
    """Draw one sample per group, store it, and sum the group estimates."""
    J = 0.0
    G = np.zeros_like(np.asarray(u_n, dtype=float))
    for st in states:
        x = st.group.measure.sample(rng)
        val, g = st.group.integrand(u_n, x)
        ud = _group_design(st.group, u_n)
        st.history.append(ud, x, val, g)
        w = st.scheme.weights(st.history, ud, st.metric, st.group.measure, rng)
        J += float(np.tensordot(w, st.history.values, axes=1))
        G = G + np.tensordot(w, st.history.gradients, axes=1)
    return J, G


def run_sum(problem: SumOfIntegrals, config: CSGConfig) -> Trajectory:
    """CSG with one independent history per group; logs per-group ``z_g<i>``."""
    rng = _as_rng(config.seed)
    box = problem.box
    d_o = box.dim
    states = [_GroupState(g, d_o, config) for g in problem.groups]
    u = rng.uniform(box.lo, box.hi) if config.u0 is None else box.clip(
        np.asarray(config.u0, dtype=float).reshape(d_o))
    N = config.iterations
    log_at = log_schedule(N) if config.log_at is None else np.unique(
        np.clip(np.asarray(config.log_at, dtype=int), 1, N))
    log_set = set(int(n) for n in log_at)
    designs = np.empty((N, d_o))
    grads = np.empty((N, d_o))
    objs = np.empty(N)
    logged: dict[str, list] = {}
    for n in range(1, N + 1):
        J, G = sum_estimate(states, u, rng)
        designs[n - 1], grads[n - 1], objs[n - 1] = u, G, J
        if n in log_set and config.monitor != "none":
            for i, st in enumerate(states):
                z = (monitor.z_sup_estimate(st.history, _group_design(st.group, u), st.metric)
                     if n >= 2 else np.nan)
                logged.setdefault(f"z_g{i}", []).append(z)
        u = csg_step(u, G, config.tau, box)
    return Trajectory(designs, grads, objs, u, log_at,
                      {k: np.asarray(v) for k, v in logged.items()})
