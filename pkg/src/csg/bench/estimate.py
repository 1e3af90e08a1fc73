"""Objective estimation at a fixed design: CSG with ``tau = 0`` versus plain Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..composite import NestedConfig, NestedObjective, NestedRun


@dataclass(frozen=True, eq=False)
class EstimateSeries:
    """Running estimates indexed by cumulative integrand evaluations."""

    evaluations: np.ndarray
    estimates: np.ndarray

    def evaluations_to(self, reference: float, rel: float = 0.01) -> float:
        """First evaluation count after which the relative error stays <= ``rel``.

        ``inf`` if the last estimate is still outside the band.
        """
        err = np.abs(self.estimates - reference) / abs(reference)
        bad = np.flatnonzero(err > rel)
        if bad.size == 0:
            return float(self.evaluations[0])
        if bad[-1] == err.size - 1:
            return float("inf")
        return float(self.evaluations[bad[-1] + 1])


def mc_objective_estimator(problem: NestedObjective, u, evaluations: int,
                           rng: np.random.Generator, inner_samples: int = 40) -> EstimateSeries:
    """Plug-in Monte-Carlo estimate of ``Phi(E f1(u, x1, E f2))``.

    Each outer draw averages ``inner_samples`` fresh inner draws, feeds the
    average to ``f1`` and updates the running mean of ``f1``; the series
    records ``Phi`` of that mean after every outer draw, so one entry costs
    ``inner_samples + 1`` integrand evaluations (1 without an inner level).
    """
    if evaluations < 1:
        raise ValueError("evaluations must be >= 1")
    if inner_samples < 1:
        raise ValueError("inner_samples must be >= 1")
    u = np.asarray(u, dtype=float)
    per = inner_samples + 1 if problem.nested else 1
    outer_n = max(1, evaluations // per)
    total = None
    evals = np.empty(outer_n)
    ests = np.empty(outer_n)
    for i in range(outer_n):
        x1 = problem.outer_measure.sample(rng)
        v = None
        if problem.nested:
            x2 = problem.inner_measure.sample(rng, size=inner_samples)
            vals, _ = problem.inner(u, x1, x2)
            v = np.mean(vals, axis=0)
        f1, _, _ = problem.outer(u, x1, v)
        total = np.asarray(f1, dtype=float) if total is None else total + f1
        J, _ = problem.transform(total / (i + 1))
        evals[i] = (i + 1) * per
        ests[i] = J
    return EstimateSeries(evals, ests)


def csg_objective_estimator(problem: NestedObjective, u, evaluations: int,
                            config: NestedConfig | None = None) -> EstimateSeries:
    """CSG with the design frozen at ``u``; each iteration costs one evaluation per level."""
    if evaluations < 1:
        raise ValueError("evaluations must be >= 1")
    base = config or NestedConfig()
    per = 2 if problem.nested else 1
    iterations = max(1, evaluations // per)
    cfg = NestedConfig(**{**base.__dict__, "tau": 0.0, "u0": np.asarray(u, dtype=float),
                          "iterations": iterations})
    run = NestedRun(problem, cfg)
    ests = np.empty(iterations)
    for n in range(iterations):
        _, J, _, _ = run.step()
        ests[n] = J
    return EstimateSeries(per * np.arange(1, iterations + 1, dtype=float), ests)
