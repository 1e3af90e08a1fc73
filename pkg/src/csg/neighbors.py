"""Nearest-record search over a growing point set with additive offsets.

All weight schemes reduce to the same query: for each query point ``q``
find ``argmin_k offsets[k] + ||q - points[k]||``. The points never move once
added, while the offsets (design distances) change every iteration, so the
index keeps the geometry and takes fresh offsets on each call.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

#: rebuild the KD-tree once this many points sit in the unindexed tail
TAIL_LIMIT = 32


class OffsetIndex:
    """Append-only point store answering offset nearest-neighbour queries.

    One-dimensional sets keep a sorted order and use an O(n + q) envelope
    sweep; higher dimensions use a KD-tree with a short linear tail that is
    folded into the tree when it grows past ``TAIL_LIMIT``.
    """

    def __init__(self, dim: int, capacity: int = 256):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = dim
        self._pts = np.empty((max(capacity, 1), dim))
        self._n = 0
        self._order = np.empty(0, dtype=np.int64)  # 1-D only: ids sorted by x
        self._tree = None
        self._n_tree = 0

    def __len__(self) -> int:
        return self._n

    @property
    def points(self) -> np.ndarray:
        return self._pts[: self._n]

    def add(self, x) -> int:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        if self._n == self._pts.shape[0]:
            grown = np.empty((2 * self._pts.shape[0], self.dim))
            grown[: self._n] = self._pts[: self._n]
            self._pts = grown
        k = self._n
        self._pts[k] = x
        self._n += 1
        if self.dim == 1:
            xs = self._pts[self._order, 0]
            pos = np.searchsorted(xs, x[0], side="right")
            self._order = np.insert(self._order, pos, k)
        return k

    def extend(self, xs) -> None:
        for x in np.asarray(xs, dtype=float).reshape(-1, self.dim):
            self.add(x)

    def _ensure_tree(self):
        if self._n - self._n_tree > TAIL_LIMIT or self._tree is None:
            self._tree = _kernels.build_tree(np.ascontiguousarray(self.points))
            self._n_tree = self._n

    def query(self, offsets, queries, exclude=None, hint=None):
        """Nearest record for each query row.

        Parameters
        ----------
        offsets : (n,) array
            Nonnegative additive offset per stored point.
        queries : (q, dim) array
        exclude : (q,) int array, optional
            Record id to ignore for each query (-1 for none).
        hint : (q,) int array, optional
            A record id known to be close to each query; only a speed-up.

        Returns
        -------
        index : (q,) int array
        distance : (q,) float array
        """
        n = self._n
        if n == 0:
            raise LookupError("query on an empty point set")
        offs = np.ascontiguousarray(offsets, dtype=float)
        if offs.shape != (n,):
            raise ValueError(f"expected {n} offsets, got shape {offs.shape}")
        Q = np.ascontiguousarray(queries, dtype=float).reshape(-1, self.dim)
        q = Q.shape[0]
        excl = (np.full(q, -1, dtype=np.int64) if exclude is None
                else np.ascontiguousarray(exclude, dtype=np.int64))
        if self.dim == 1:
            order = self._order
            qx = Q[:, 0]
            qord = np.argsort(qx, kind="stable")
            k, d = _kernels.envelope_query(
                self._pts[order, 0], order, offs[order], qx[qord], excl[qord])
            index = np.empty(q, dtype=np.int64)
            dist = np.empty(q)
            index[qord] = k
            dist[qord] = d
            return index, dist
        self._ensure_tree()
        if hint is None:
            hint = np.full(q, -1, dtype=np.int64)
        else:
            hint = np.array(hint, dtype=np.int64).reshape(q)
            hint[(hint < 0) | (hint >= n)] = -1
        return _kernels.tree_query(
            np.ascontiguousarray(self.points), offs, Q, excl, hint,
            *self._tree, self._n_tree)

    def query_self(self, offsets, leave_one_out: bool = False, hint=None):
        """Query every stored point against the whole set.

        With ``leave_one_out`` each point's own record is excluded. ``hint``
        may cover only a prefix of the points; the rest are seeded with
        their own record.
        """
        n = self._n
        ids = np.arange(n, dtype=np.int64)
        if self.dim == 1:
            order = self._order
            offs = np.ascontiguousarray(offsets, dtype=float)
            xs = self._pts[order, 0]
            excl = order if leave_one_out else np.full(n, -1, dtype=np.int64)
            k, d = _kernels.envelope_query(xs, order, offs[order], xs, excl)
            index = np.empty(n, dtype=np.int64)
            dist = np.empty(n)
            index[order] = k
            dist[order] = d
            return index, dist
        if leave_one_out:
            return self.query(offsets, self.points, exclude=ids, hint=hint)
        seed = ids.copy()
        if hint is not None:
            hint = np.asarray(hint, dtype=np.int64)[:n]
            seed[: hint.size] = hint
        return self.query(offsets, self.points, hint=seed)

