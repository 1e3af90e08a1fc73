"""Product metric and the append-only log of integrand samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .neighbors import OffsetIndex


class Block(NamedTuple):
    name: str
    dim: int
    coef: float = 1.0


class ProductMetric:
    """Weighted sum of per-block Euclidean norms.

    The last block is the integration variable; all earlier blocks form the
    context (design, and for nested problems any outer variables) that is
    held fixed while cell weights are computed.
    """

    def __init__(self, blocks):
        blocks = tuple(b if isinstance(b, Block) else Block(*b) for b in blocks)
        if not blocks:
            raise ValueError("metric needs at least one block")
        for b in blocks:
            if b.dim < 1 or not b.coef > 0:
                raise ValueError(f"bad block {b}: need dim >= 1 and coef > 0")
        self.blocks = blocks
        bounds = np.cumsum([0] + [b.dim for b in blocks])
        self._slices = [slice(int(a), int(z)) for a, z in zip(bounds[:-1], bounds[1:])]

    @classmethod
    def design_sample(cls, design_dim: int, sample_dim: int,
                      c_u: float = 1.0, c_x: float = 1.0) -> ProductMetric:
        return cls([Block("u", design_dim, c_u), Block("x", sample_dim, c_x)])

    def __repr__(self) -> str:
        inner = ", ".join(f"{b.name}:{b.dim}*{b.coef:g}" for b in self.blocks)
        return f"ProductMetric({inner})"

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def context_dim(self) -> int:
        return self.dim - self.blocks[-1].dim

    @property
    def sample_coef(self) -> float:
        return self.blocks[-1].coef

    def coef(self, name: str) -> float:
        for b in self.blocks:
            if b.name == name:
                return b.coef
        raise KeyError(name)

    def scaled(self, factor: float) -> ProductMetric:
        return ProductMetric([b._replace(coef=b.coef * factor) for b in self.blocks])

    def distance(self, p, q) -> float:
        p = np.asarray(p, dtype=float).ravel()
        q = np.asarray(q, dtype=float).ravel()
        if p.size != self.dim or q.size != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        return float(sum(b.coef * np.linalg.norm(p[s] - q[s])
                         for b, s in zip(self.blocks, self._slices)))

    def context_distances(self, contexts, query) -> np.ndarray:
        """Context part of the distance from ``query`` to every row of ``contexts``."""
        C = np.asarray(contexts, dtype=float).reshape(-1, self.context_dim)
        query = np.asarray(query, dtype=float).ravel()
        if query.size != self.context_dim:
            raise ValueError(f"context query must have {self.context_dim} coordinates")
        out = np.zeros(C.shape[0])
        for b, s in zip(self.blocks[:-1], self._slices[:-1]):
            diff = C[:, s] - query[s]
            out += b.coef * np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return out

    def offsets(self, contexts, query) -> np.ndarray:
        """Context distances in units of the integration block."""
        return self.context_distances(contexts, query) / self.sample_coef


def product_distance(metric: ProductMetric, p, q) -> float:
    return metric.distance(p, q)


@dataclass(frozen=True, eq=False)
class SampleRecord:
    design: np.ndarray
    point: np.ndarray
    value: np.ndarray | float | None
    gradient: np.ndarray | None
    snapshot: object = None


class _Growable:
    """Row buffer with amortised doubling."""

    def __init__(self, row_shape, capacity=256):
        self.row_shape = tuple(row_shape)
        self.data = np.empty((capacity, *self.row_shape))
        self.n = 0

    def append(self, row):
        if self.n == self.data.shape[0]:
            grown = np.empty((2 * self.n, *self.row_shape))
            grown[: self.n] = self.data[: self.n]
            self.data = grown
        self.data[self.n] = row
        self.n += 1

    def view(self):
        v = self.data[: self.n]
        v.flags.writeable = False
        return v


class History:
    """Append-only log of ``(u_k, x_k, j(u_k, x_k), grad_u j(u_k, x_k))``.

    ``design`` is whatever context the metric compares before the sample
    block: the design ``u`` for plain problems, ``(u, x1)`` for inner
    integrals of nested ones. Records are addressed by 0-based insertion
    position. With ``max_size`` set, the oldest records are evicted
    (positions then refer to the kept window); the default keeps everything.
    """

    def __init__(self, design_dim: int, sample_dim: int,
                 max_size: int | None = None, gradient_dim: int | None = None):
        if max_size is not None and max_size < 1:
            raise ValueError("max_size must be >= 1")
        self.design_dim = design_dim
        self.sample_dim = sample_dim
        # nested problems store (u, x1) as the design context while the
        # gradient is still taken with respect to u alone
        self.gradient_dim = design_dim if gradient_dim is None else gradient_dim
        self.max_size = max_size
        self._reset_storage()

    def _reset_storage(self):
        self._designs = _Growable((self.design_dim,))
        self._values = None
        self._grads = None
        self._snapshots = []
        self.index = OffsetIndex(self.sample_dim)

    def __len__(self) -> int:
        return self._designs.n

    def append(self, design, point, value=None, gradient=None, snapshot=None) -> int:
        design = np.asarray(design, dtype=float).reshape(self.design_dim)
        point = np.asarray(point, dtype=float).reshape(self.sample_dim)
        if gradient is not None:
            gradient = np.asarray(gradient, dtype=float)
            if gradient.shape[-1] != self.gradient_dim:
                raise ValueError("gradient's last axis must match the design dimension")
            if self._grads is None:
                self._grads = _Growable(gradient.shape)
            self._grads.append(gradient)
        if value is not None:
            value = np.asarray(value, dtype=float)
            if self._values is None:
                self._values = _Growable(value.shape)
            self._values.append(value)
        self._designs.append(design)
        self.index.add(point)
        self._snapshots.append(snapshot)
        if self.max_size is not None and len(self) > self.max_size:
            self._evict_oldest()
        return len(self) - 1

    def _evict_oldest(self):
        keep = slice(1, None)
        designs = self.designs[keep].copy()
        points = self.points[keep].copy()
        values = None if self._values is None else self.values[keep].copy()
        grads = None if self._grads is None else self.gradients[keep].copy()
        snaps = self._snapshots[1:]
        self._reset_storage()
        for k in range(designs.shape[0]):
            self.append(designs[k], points[k],
                        None if values is None else values[k],
                        None if grads is None else grads[k], snaps[k])

    @property
    def designs(self) -> np.ndarray:
        return self._designs.view()

    @property
    def points(self) -> np.ndarray:
        view = self.index.points.view()
        view.flags.writeable = False
        return view

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            raise LookupError("history holds no integrand values")
        return self._values.view()

    @property
    def gradients(self) -> np.ndarray:
        if self._grads is None:
            raise LookupError("history holds no integrand gradients")
        return self._grads.view()

    @property
    def snapshots(self) -> list:
        return list(self._snapshots)

    def __getitem__(self, k: int) -> SampleRecord:
        n = len(self)
        if not -n <= k < n:
            raise IndexError(k)
        k %= n
        return SampleRecord(
            self.designs[k], self.points[k],
            None if self._values is None else self.values[k],
            None if self._grads is None else self.gradients[k],
            self._snapshots[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))
