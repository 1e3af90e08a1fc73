"""Compiled kernels for nearest-record queries with per-record offsets.

Every query asks for ``argmin_k offsets[k] + ||q - points[k]||`` (Euclidean),
optionally excluding one record. Ties go to the smallest record id, where
distances within a relative ``TIE_RTOL`` count as tied: the same distance
evaluated through different but equivalent formulas can differ in the last
bits, and the tie rule should not depend on that.
"""

import numpy as np
from numba import njit

LEAF_SIZE = 16
TIE_RTOL = 1e-12


@njit(cache=True)
def _slack(d):
    return TIE_RTOL * abs(d) if np.isfinite(d) else 0.0


@njit(cache=True)
def _better(d1, k1, d2, k2):
    tol = _slack(max(abs(d1), abs(d2)) if np.isfinite(d2) else d1)
    if d1 < d2 - tol:
        return True
    return d1 <= d2 + tol and k1 < k2


@njit(cache=True)
def _reach(bd):
    """Largest distance that can still tie with (and so beat) ``bd``."""
    return bd + _slack(bd)


@njit(cache=True)
def envelope_query(xs, ids, offs, qs, excl):
    """1-D lower envelope sweep.

    ``xs`` sorted ascending with matching ``ids``/``offs``; ``qs`` sorted
    ascending with ``excl`` holding the record id to skip (or -1).
    Returns (index, distance) aligned with ``qs``.
    """
    n = xs.shape[0]
    q = qs.shape[0]
    big = np.inf
    left_k = np.full(q, -1, np.int64)
    right_k = np.full(q, -1, np.int64)

    # left pass: minimise off - x over points with x <= query, keep top two
    b1v, b1k, b2v, b2k = big, -1, big, -1
    p = 0
    for i in range(q):
        qv = qs[i]
        while p < n and xs[p] <= qv:
            v = offs[p] - xs[p]
            k = ids[p]
            # compare as distances at this query so the tie slack is relative to them
            if _better(v + qv, k, b1v + qv, b1k):
                b2v, b2k = b1v, b1k
                b1v, b1k = v, k
            elif _better(v + qv, k, b2v + qv, b2k):
                b2v, b2k = v, k
            p += 1
        left_k[i] = b2k if b1k == excl[i] else b1k

    # right pass: minimise off + x over points with x >= query
    b1v, b1k, b2v, b2k = big, -1, big, -1
    p = n - 1
    for i in range(q - 1, -1, -1):
        qv = qs[i]
        while p >= 0 and xs[p] >= qv:
            v = offs[p] + xs[p]
            k = ids[p]
            if _better(v - qv, k, b1v - qv, b1k):
                b2v, b2k = b1v, b1k
                b1v, b1k = v, k
            elif _better(v - qv, k, b2v - qv, b2k):
                b2v, b2k = v, k
            p -= 1
        right_k[i] = b2k if b1k == excl[i] else b1k

    # final comparison in the canonical form off + |q - x|
    pos = np.empty(n, np.int64)
    for t in range(n):
        pos[ids[t]] = t
    out_k = np.full(q, -1, np.int64)
    out_d = np.full(q, big)
    for i in range(q):
        bd, bk = big, -1
        for k in (left_k[i], right_k[i]):
            if k < 0:
                continue
            t = pos[k]
            dist = offs[t] + abs(qs[i] - xs[t])
            if _better(dist, k, bd, bk):
                bd, bk = dist, k
        out_k[i] = bk
        out_d[i] = bd
    return out_k, out_d


@njit(cache=True)
def build_tree(X):
    """Median-split KD-tree over the rows of ``X``.

    Children always carry larger node ids than their parent, which lets
    per-node reductions run as a single reverse sweep.
    """
    n, d = X.shape
    perm = np.arange(n)
    cap = 4 * (n // LEAF_SIZE + 1) + 1
    start = np.empty(cap, np.int64)
    stop = np.empty(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    bmin = np.empty((cap, d))
    bmax = np.empty((cap, d))
    stack = np.empty(cap, np.int64)
    nn = 1
    start[0] = 0
    stop[0] = n
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = stop[node]
        for j in range(d):
            lo = np.inf
            hi = -np.inf
            for t in range(s, e):
                v = X[perm[t], j]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            bmin[node, j] = lo
            bmax[node, j] = hi
        if e - s <= LEAF_SIZE:
            continue
        sd = 0
        width = -1.0
        for j in range(d):
            w = bmax[node, j] - bmin[node, j]
            if w > width:
                width = w
                sd = j
        if width <= 0.0:
            continue
        sub = perm[s:e].copy()
        order = np.argsort(X[sub, sd])
        for t in range(e - s):
            perm[s + t] = sub[order[t]]
        m = (s + e) // 2
        lc = nn
        rc = nn + 1
        nn += 2
        start[lc] = s
        stop[lc] = m
        start[rc] = m
        stop[rc] = e
        left[node] = lc
        right[node] = rc
        stack[sp] = lc
        sp += 1
        stack[sp] = rc
        sp += 1
    return (perm, start[:nn].copy(), stop[:nn].copy(), left[:nn].copy(),
            right[:nn].copy(), bmin[:nn].copy(), bmax[:nn].copy())


@njit(cache=True)
def _box_gap(qrow, bmin, bmax, node):
    s = 0.0
    for j in range(qrow.shape[0]):
        v = qrow[j]
        if v < bmin[node, j]:
            g = bmin[node, j] - v
            s += g * g
        elif v > bmax[node, j]:
            g = v - bmax[node, j]
            s += g * g
    return np.sqrt(s)


@njit(cache=True)
def _dist(qrow, X, k):
    s = 0.0
    for j in range(qrow.shape[0]):
        g = qrow[j] - X[k, j]
        s += g * g
    return np.sqrt(s)


@njit(cache=True)
def tree_query(X, offs, Q, excl, hint, perm, start, stop, left, right,
               bmin, bmax, n_tree):
    """Branch-and-bound over the tree built on ``X[:n_tree]``.

    Rows ``n_tree:`` of ``X`` form an unindexed tail scanned linearly.
    ``hint`` seeds each query with a known record (or -1).
    """
    n = X.shape[0]
    q = Q.shape[0]
    nn = start.shape[0]
    amin = np.empty(nn)
    for node in range(nn - 1, -1, -1):
        if left[node] < 0:
            m = np.inf
            for t in range(start[node], stop[node]):
                v = offs[perm[t]]
                if v < m:
                    m = v
            amin[node] = m
        else:
            amin[node] = min(amin[left[node]], amin[right[node]])

    out_k = np.full(q, -1, np.int64)
    out_d = np.full(q, np.inf)
    stack = np.empty(2 * nn + 2, np.int64)
    lbs = np.empty(2 * nn + 2)
    for i in range(q):
        qrow = Q[i]
        ex = excl[i]
        bd = np.inf
        bk = -1
        h = hint[i]
        if h >= 0 and h != ex:
            bd = offs[h] + _dist(qrow, X, h)
            bk = h
        for k in range(n_tree, n):
            if k == ex or offs[k] > _reach(bd):
                continue
            dist = offs[k] + _dist(qrow, X, k)
            if _better(dist, k, bd, bk):
                bd = dist
                bk = k
        if n_tree > 0:
            sp = 1
            stack[0] = 0
            lbs[0] = amin[0] + _box_gap(qrow, bmin, bmax, 0)
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if lbs[sp] > _reach(bd):
                    continue
                lc = left[node]
                if lc < 0:
                    for t in range(start[node], stop[node]):
                        k = perm[t]
                        if k == ex or offs[k] > _reach(bd):
                            continue
                        dist = offs[k] + _dist(qrow, X, k)
                        if _better(dist, k, bd, bk):
                            bd = dist
                            bk = k
                    continue
                rc = right[node]
                ll = amin[lc] + _box_gap(qrow, bmin, bmax, lc)
                lr = amin[rc] + _box_gap(qrow, bmin, bmax, rc)
                # nearer child goes on top of the stack
                if ll <= lr:
                    if lr <= _reach(bd):
                        stack[sp] = rc
                        lbs[sp] = lr
                        sp += 1
                    if ll <= _reach(bd):
                        stack[sp] = lc
                        lbs[sp] = ll
                        sp += 1
                else:
                    if ll <= _reach(bd):
                        stack[sp] = lc
                        lbs[sp] = ll
                        sp += 1
                    if lr <= _reach(bd):
                        stack[sp] = rc
                        lbs[sp] = lr
                        sp += 1
        out_k[i] = bk
        out_d[i] = bd
    return out_k, out_d
