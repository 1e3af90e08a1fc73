"""Probability measures, samplers and equal-mass quadrature rules.

Three measure families cover everything the optimizer integrates against:
uniform boxes, products of truncated normals, and point masses. Each can
draw samples, report its support box, and produce a tensor quadrature rule
whose nodes serve as cell representatives for grid-resolved weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special


def std_normal_cdf(t):
    """Standard normal CDF (vectorised)."""
    return special.ndtr(t)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("quantile requires 0 < p < 1")
    out = special.ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class IntervalDomain:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ValueError("box bounds must be equal-length vectors")
        if np.any(lo >= hi):
            raise ValueError("box requires lo < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> BoxDomain:
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lo.size

    def clip(self, u):
        return np.clip(u, self.lo, self.hi)

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))

    def interval(self, i: int) -> IntervalDomain:
        return IntervalDomain(float(self.lo[i]), float(self.hi[i]))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes (rows) with nonnegative masses summing to one."""

    nodes: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        masses = np.asarray(self.masses, dtype=float)
        if nodes.shape[0] != masses.shape[0]:
            raise ValueError("nodes and masses differ in length")
        if np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return self.masses.size

    def integrate(self, values):
        """Mass-weighted sum over the leading axis of ``values``."""
        return np.tensordot(self.masses, np.asarray(values, dtype=float), axes=1)

    @staticmethod
    def tensor(rules) -> QuadratureRule:
        """Tensor product of one-dimensional rules (first factor slowest)."""
        rules = list(rules)
        if len(rules) == 1:
            return rules[0]
        axes = [r.nodes[:, 0] for r in rules]
        grids = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1)
        masses = np.ones(1)
        for r in rules:
            masses = np.multiply.outer(masses, r.masses).ravel()
        # renormalise away the rounding of repeated products
        return QuadratureRule(nodes, masses / masses.sum())


def uniform_grid(domain: IntervalDomain, n: int) -> QuadratureRule:
    """Midpoints of ``n`` equal subintervals, each carrying mass 1/n."""
    if n < 1:
        raise ValueError("uniform_grid needs n >= 1")
    h = domain.width / n
    nodes = domain.lo + h * (np.arange(n) + 0.5)
    return QuadratureRule(nodes, np.full(n, 1.0 / n))


def equal_mass_nodes(mean: float, sd: float, n: int,
                     radius: float = 3.0) -> QuadratureRule:
    """Equal-probability partition of a normal, clipped to ``mean +- radius*sd``.

    The untruncated CDF splits (0, 1) into ``n`` equal pieces; each preimage
    interval is clipped to the truncation window and represented by its
    midpoint with mass exactly ``1/n``.
    """
    if n < 1:
        raise ValueError("equal_mass_nodes needs n >= 1")
    if sd <= 0 or radius <= 0:
        raise ValueError("sd and radius must be positive")
    cuts = np.empty(n + 1)
    cuts[0], cuts[-1] = -radius, radius
    if n > 1:
        cuts[1:-1] = np.clip(special.ndtri(np.arange(1, n) / n), -radius, radius)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    return QuadratureRule(mean + sd * mids, np.full(n, 1.0 / n))


class MeasureSpec:
    """Common interface of the supported measures."""

    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def support(self) -> BoxDomain:
        raise NotImplementedError

    def grid_rule(self, resolution: int) -> QuadratureRule:
        """Tensor grid with ``resolution`` equal-mass cells per coordinate."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class UniformBox(MeasureSpec):
    box: BoxDomain
    kind: str = field(default="uniform-box", init=False)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> UniformBox:
        return cls(BoxDomain.cube(lo, hi, dim))

    @property
    def dim(self) -> int:
        return self.box.dim

    def sample(self, rng, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.box.lo, self.box.hi, size=shape)

    def support(self) -> BoxDomain:
        return self.box

    def grid_rule(self, resolution: int) -> QuadratureRule:
        return QuadratureRule.tensor(
            uniform_grid(self.box.interval(i), resolution) for i in range(self.dim))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.box.lo.tolist(),
                "hi": self.box.hi.tolist()}


@dataclass(frozen=True, eq=False)
class TruncatedNormal(MeasureSpec):
    """Product of independent normals truncated to ``mean +- radius*sd``."""

    means: np.ndarray
    sds: np.ndarray
    radius: float = 3.0
    kind: str = field(default="truncated-normal", init=False)

    def __post_init__(self):
        means = np.atleast_1d(np.asarray(self.means, dtype=float))
        sds = np.atleast_1d(np.asarray(self.sds, dtype=float))
        if means.shape != sds.shape or means.ndim != 1:
            raise ValueError("means and sds must be equal-length vectors")
        if np.any(sds <= 0):
            raise ValueError("standard deviations must be positive")
        if self.radius <= 0:
            raise ValueError("truncation radius must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)

    @property
    def dim(self) -> int:
        return self.means.size

    def sample(self, rng, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        lo = special.ndtr(-self.radius)
        p = rng.uniform(lo, 1.0 - lo, size=shape)
        z = np.clip(special.ndtri(p), -self.radius, self.radius)
        return self.means + self.sds * z

    def support(self) -> BoxDomain:
        w = self.radius * self.sds
        return BoxDomain(self.means - w, self.means + w)

    def grid_rule(self, resolution: int) -> QuadratureRule:
        return QuadratureRule.tensor(
            equal_mass_nodes(m, s, resolution, self.radius)
            for m, s in zip(self.means, self.sds))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "means": self.means.tolist(),
                "sds": self.sds.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class PointMass(MeasureSpec):
    location: np.ndarray
    kind: str = field(default="point-mass", init=False)

    def __post_init__(self):
        object.__setattr__(self, "location",
                           np.atleast_1d(np.asarray(self.location, dtype=float)))

    @property
    def dim(self) -> int:
        return self.location.size

    def sample(self, rng, size=None):
        if size is None:
            return self.location.copy()
        return np.tile(self.location, (size, 1))

    def support(self) -> BoxDomain:
        # degenerate box; widened by a hair so lo < hi holds
        eps = 1e-12 * (1.0 + np.abs(self.location))
        return BoxDomain(self.location - eps, self.location + eps)

    def grid_rule(self, resolution: int) -> QuadratureRule:
        return QuadratureRule(self.location[None, :], np.ones(1))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "location": self.location.tolist()}


def sample(measure: MeasureSpec, rng: np.random.Generator):
    """Draw one point from ``measure``."""
    return measure.sample(rng)


def measure_from_dict(spec: dict) -> MeasureSpec:
    """Inverse of ``MeasureSpec.to_dict`` (used by experiment config files)."""
    kind = spec.get("kind")
    if kind == "uniform-box":
        return UniformBox(BoxDomain(spec["lo"], spec["hi"]))
    if kind == "truncated-normal":
        return TruncatedNormal(spec["means"], spec["sds"], spec.get("radius", 3.0))
    if kind == "point-mass":
        return PointMass(spec["location"])
    raise ValueError(f"unknown measure kind {kind!r}")


def run_rng(base_seed: int, run_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one run of an experiment."""
    return np.random.default_rng(np.random.SeedSequence([base_seed, run_index]))
