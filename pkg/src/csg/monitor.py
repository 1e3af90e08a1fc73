"""Online estimates of the gradient approximation error.

The error of the weighted gradient is bounded by ``L * sup_x Z_n(x)`` where
``Z_n(x)`` is the product distance from ``(u_n, x)`` to the nearest record
and ``L`` a Lipschitz constant of the integrand gradient. Both factors are
estimated from the history alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .history import History, ProductMetric
from .measures import QuadratureRule
from .weights import _context_offsets

VARIANTS = ("paper", "leave-one-out")

#: record pairs closer than this are skipped in the Lipschitz ratio
PAIR_EPS = 1e-12


@dataclass(frozen=True)
class ErrorReport:
    n: int
    z_sup_estimate: float
    lipschitz_estimate: float
    error_bound: float

    @classmethod
    def build(cls, n: int, z_sup: float, lipschitz: float) -> ErrorReport:
        return cls(n, float(z_sup), float(lipschitz), error_bound(lipschitz, z_sup))


def z_values(history: History, u_n, points, metric: ProductMetric) -> np.ndarray:
    """``Z_n`` at each row of ``points``."""
    offs = _context_offsets(history, u_n, metric)
    pts = np.asarray(points, dtype=float).reshape(-1, history.sample_dim)
    _, dist = history.index.query(offs, pts)
    return metric.sample_coef * dist


def z_value(history: History, u_n, x, metric: ProductMetric) -> float:
    """Distance from ``(u_n, x)`` to the nearest record."""
    return float(z_values(history, u_n, x, metric)[0])


def z_sup_estimate(history: History, u_n, metric: ProductMetric,
                   variant: str = "leave-one-out") -> float:
    """Sample-based estimate of ``sup_x Z_n(x)``.

    ``paper`` takes the max of ``Z_n`` over the stored samples, which
    collapses towards zero whenever the design stalls (each sample is its
    own nearest record). ``leave-one-out`` drops the sample's own record.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; use one of {VARIANTS}")
    n = len(history)
    if n == 0 or (variant == "leave-one-out" and n < 2):
        raise LookupError(f"{variant} estimate needs more records (have {n})")
    offs = _context_offsets(history, u_n, metric)
    _, dist = history.index.query_self(offs, leave_one_out=variant == "leave-one-out")
    return float(metric.sample_coef * dist.max())


def z_sup_on_grid(history: History, u_n, metric: ProductMetric,
                  rule: QuadratureRule) -> float:
    """Max of ``Z_n`` over the nodes of a (fine) grid."""
    return float(z_values(history, u_n, rule.nodes, metric).max())


class LipschitzTracker:
    """Running max of gradient difference quotients over record pairs.

    Each :meth:`update` compares only the records added since the last call
    against all earlier ones, so keeping the estimate current costs O(n)
    per new record.
    """

    def __init__(self, c_u: float = 1.0, c_x: float = 1.0):
        self.c_u = c_u
        self.c_x = c_x
        self.value = 0.0
        self.pairs = 0
        self._seen = 0

    def update(self, history: History) -> float:
        n = len(history)
        if n < self._seen:
            raise ValueError("history shrank; use a fresh tracker after eviction")
        if n > self._seen:
            U, X = history.designs, history.points
            G = history.gradients.reshape(n, -1)
            for k in range(max(self._seen, 1), n):
                du = np.linalg.norm(U[:k] - U[k], axis=1)
                dx = np.linalg.norm(X[:k] - X[k], axis=1)
                dist = self.c_u * du + self.c_x * dx
                ok = dist >= PAIR_EPS
                if np.any(ok):
                    dg = np.linalg.norm(G[:k][ok] - G[k], axis=1)
                    self.value = max(self.value, float(np.max(dg / dist[ok])))
                    self.pairs += int(ok.sum())
            self._seen = n
        return self.value


def lipschitz_estimate(history: History) -> float:
    """Max over record pairs of ``|g_i - g_j| / (|u_i - u_j| + |x_i - x_j|)``."""
    if len(history) < 2:
        raise LookupError("lipschitz estimate needs at least two records")
    tracker = LipschitzTracker()
    value = tracker.update(history)
    if tracker.pairs == 0:
        raise LookupError("all record pairs coincide")
    return value


def error_bound(lipschitz: float, z_sup: float) -> float:
    if lipschitz < 0 or z_sup < 0:
        raise ValueError("error bound components must be nonnegative")
    return float(lipschitz * z_sup)


def should_stop(bound: float, tol: float, n: int | None = None,
                min_iterations: int = 0) -> bool:
    """True once ``bound < tol`` and at least ``min_iterations`` have run."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if n is not None and n < min_iterations:
        return False
    return bool(bound < tol)
