"""Slow, obviously-correct reference implementations used by the tests."""

from __future__ import annotations

import numpy as np

from csg.history import History, ProductMetric


TIE_RTOL = 1e-12


def brute_nearest(history: History, context, x, metric: ProductMetric, exclude=None) -> int:
    """Linear scan; the smallest index within ``TIE_RTOL`` of the minimum wins."""
    q = np.concatenate([np.ravel(context), np.ravel(x)])
    d = np.array([np.inf if k == exclude else
                  metric.distance(q, np.concatenate([history.designs[k], history.points[k]]))
                  for k in range(len(history))])
    if not np.isfinite(d).any():
        return -1
    best = d.min()
    return int(np.flatnonzero(d <= best + TIE_RTOL * best)[0])


def brute_distance(history: History, context, x, metric: ProductMetric) -> float:
    q = np.concatenate([np.ravel(context), np.ravel(x)])
    return min(metric.distance(q, np.concatenate([history.designs[k], history.points[k]]))
               for k in range(len(history)))


def brute_empirical(history: History, u_n, metric: ProductMetric) -> np.ndarray:
    n = len(history)
    counts = np.zeros(n)
    for i in range(n):
        counts[brute_nearest(history, u_n, history.points[i], metric)] += 1
    return counts / n


def brute_cells(history: History, u_n, metric: ProductMetric, nodes, masses) -> np.ndarray:
    w = np.zeros(len(history))
    for x, m in zip(np.asarray(nodes).reshape(len(masses), -1), masses):
        w[brute_nearest(history, u_n, x, metric)] += m
    return w


def random_history(rng, n, d_u, d_x, gradients=True, design_spread=1.0) -> History:
    h = History(d_u, d_x)
    for _ in range(n):
        u = rng.uniform(-design_spread, design_spread, d_u)
        x = rng.uniform(-0.5, 0.5, d_x)
        h.append(u, x, float(rng.normal()), rng.normal(size=d_u) if gradients else None)
    return h
