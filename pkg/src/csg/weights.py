"""Design-dependent integration weights over a sample history.

Each scheme picks a set of query points in the integration domain, each
carrying a mass, assigns every query to its nearest record under the
product metric (context fixed at the current design), and sums the masses
per record:

* ``empirical``  -- queries are the stored samples themselves, mass 1/n;
* ``exact-grid`` -- queries are equal-mass grid nodes of the true measure;
* ``mc``         -- queries are fresh i.i.d. draws from the measure, mass 1/m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .history import History, ProductMetric
from .measures import MeasureSpec, QuadratureRule
from .neighbors import OffsetIndex

SCHEMES = ("empirical", "exact-grid", "mc")

#: cells per one-dimensional measure when no resolution is given
DEFAULT_GRID_CELLS = 100_000


def default_resolution(dim: int) -> int:
    """Cells per coordinate so that the tensor grid holds about 1e5 nodes."""
    if dim == 1:
        return DEFAULT_GRID_CELLS
    return max(10, int(round(DEFAULT_GRID_CELLS ** (1.0 / dim))))


@dataclass(frozen=True, eq=False)
class CellAssignment:
    """Outcome of assigning mass-carrying queries to their nearest records.

    ``distance`` is the full product distance from ``(context, query)`` to
    the owning record, i.e. ``Z_n`` evaluated at the query.
    """

    weights: np.ndarray
    queries: np.ndarray
    owner: np.ndarray
    distance: np.ndarray
    masses: np.ndarray


def assign_cells(index: OffsetIndex, offsets, queries, masses,
                 coef: float = 1.0, exclude=None, hint=None) -> CellAssignment:
    """Sum query masses onto their nearest records.

    ``offsets`` are context distances already divided by ``coef`` (the
    coefficient of the integration block).
    """
    n = len(index)
    queries = np.asarray(queries, dtype=float).reshape(-1, index.dim)
    masses = np.broadcast_to(np.asarray(masses, dtype=float), (queries.shape[0],))
    owner, dist = index.query(offsets, queries, exclude=exclude, hint=hint)
    if masses.size and np.all(masses == masses[0]):
        # equal masses: counts / q is exact, summing q copies of 1/q is not
        weights = np.bincount(owner, minlength=n) / masses.size
    else:
        weights = np.bincount(owner, weights=masses, minlength=n)
    return CellAssignment(weights, queries, owner, coef * dist, masses)


def _context_offsets(history: History, u_n, metric: ProductMetric) -> np.ndarray:
    if len(history) == 0:
        raise LookupError("history is empty")
    if metric.context_dim != history.design_dim or metric.blocks[-1].dim != history.sample_dim:
        raise ValueError(f"{metric!r} does not match the history layout")
    return metric.offsets(history.designs, u_n)


def nearest_index(history: History, query, metric: ProductMetric) -> int:
    """Record nearest to the full point ``query = (context, x)``.

    Ties go to the smallest (0-based) record index.
    """
    query = np.asarray(query, dtype=float).ravel()
    if query.size != metric.dim:
        raise ValueError(f"query must have {metric.dim} coordinates")
    c = metric.context_dim
    offs = _context_offsets(history, query[:c], metric)
    owner, _ = history.index.query(offs, query[c:][None, :])
    return int(owner[0])


def empirical_cells(history: History, u_n, metric: ProductMetric,
                    hint=None) -> CellAssignment:
    offs = _context_offsets(history, u_n, metric)
    n = len(history)
    owner, dist = history.index.query_self(offs, hint=hint)
    weights = np.bincount(owner, minlength=n) / n
    return CellAssignment(weights, history.points, owner,
                          metric.sample_coef * dist, np.full(n, 1.0 / n))


def empirical_weights(history: History, u_n, metric: ProductMetric) -> np.ndarray:
    """Cell masses of the empirical measure of the stored samples."""
    return empirical_cells(history, u_n, metric).weights


def _check_measure(measure: MeasureSpec, history: History):
    if not isinstance(measure, MeasureSpec):
        raise ValueError(f"unsupported measure {measure!r}")
    if measure.dim != history.sample_dim:
        raise ValueError("measure dimension differs from the sample dimension")


def exact_cells_grid(history: History, u_n, metric: ProductMetric,
                     measure: MeasureSpec, resolution: int | None = None,
                     rule: QuadratureRule | None = None, hint=None) -> CellAssignment:
    _check_measure(measure, history)
    if rule is None:
        if resolution is None:
            resolution = default_resolution(measure.dim)
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        rule = measure.grid_rule(resolution)
    offs = _context_offsets(history, u_n, metric)
    return assign_cells(history.index, offs, rule.nodes, rule.masses,
                        metric.sample_coef, hint=hint)


def exact_weights_grid(history: History, u_n, metric: ProductMetric,
                       measure: MeasureSpec, resolution: int | None = None) -> np.ndarray:
    """Grid-resolved true-measure mass of every record's cell.

    ``resolution`` counts equal-mass cells per coordinate (tensor grid in
    several dimensions); see :func:`default_resolution` for the default.
    """
    return exact_cells_grid(history, u_n, metric, measure, resolution).weights


def mc_cells(history: History, u_n, metric: ProductMetric, measure: MeasureSpec,
             m: int, rng: np.random.Generator) -> CellAssignment:
    if m < 1:
        raise ValueError("mc weights need m >= 1")
    _check_measure(measure, history)
    offs = _context_offsets(history, u_n, metric)
    draws = measure.sample(rng, size=m)
    return assign_cells(history.index, offs, draws, 1.0 / m, metric.sample_coef)


def mc_weights(history: History, u_n, metric: ProductMetric, measure: MeasureSpec,
               m: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo cell masses from ``m`` fresh draws of ``measure``."""
    return mc_cells(history, u_n, metric, measure, m, rng).weights


@dataclass(eq=False)
class WeightScheme:
    """Named weight scheme with its knobs, reusable across iterations.

    Keeps the quadrature rule and the previous grid owners between calls
    (the latter only seed the tree search), so one instance belongs to a
    single run.
    """

    name: str = "empirical"
    resolution: int | None = None
    mc_samples: int = 1000
    _rule: QuadratureRule | None = field(default=None, init=False, repr=False)
    _rule_key: object = field(default=None, init=False, repr=False)
    _owners: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ValueError(f"unknown weight scheme {self.name!r}; use one of {SCHEMES}")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")

    def fresh(self) -> WeightScheme:
        return WeightScheme(self.name, self.resolution, self.mc_samples)

    def _grid(self, measure: MeasureSpec) -> QuadratureRule:
        key = (id(measure), self.resolution)
        if self._rule is None or self._rule_key != key:
            res = self.resolution or default_resolution(measure.dim)
            self._rule = measure.grid_rule(res)
            self._rule_key = key
            self._owners = None
        return self._rule

    def cells(self, history: History, u_n, metric: ProductMetric,
              measure: MeasureSpec | None = None,
              rng: np.random.Generator | None = None) -> CellAssignment:
        if self.name == "empirical":
            out = empirical_cells(history, u_n, metric, hint=self._hint(history))
            self._owners = out.owner
            return out
        if measure is None:
            raise ValueError(f"scheme {self.name!r} needs the sampling measure")
        if self.name == "mc":
            if rng is None:
                raise ValueError("mc weights need an rng")
            return mc_cells(history, u_n, metric, measure, self.mc_samples, rng)
        rule = self._grid(measure)
        hint = self._hint(history)
        if hint is not None and hint.size != len(rule):
            hint = None
        out = exact_cells_grid(history, u_n, metric, measure, rule=rule, hint=hint)
        self._owners = out.owner
        return out

    def _hint(self, history: History):
        # previous owners stay valid record ids while the history only grows
        if self._owners is None or history.max_size is not None:
            return None
        return self._owners

    def weights(self, history, u_n, metric, measure=None, rng=None) -> np.ndarray:
        return self.cells(history, u_n, metric, measure, rng).weights
