"""Compiled dense shortest-path kernels.

Weights come either from a materialised table (``table.shape[0] > 0``) or
from the keyed hash, in which case each weight is recomputed when needed and
memory stays O(n).
"""

import math

import numba as nb
import numpy as np

from .core_random import UNIT, nb_row_hashes, nb_mix64, _KEY2


@nb.njit(cache=True)
def sssp(table, key, mean, n, source, max_settled, t_max, target):
    """Dense Dijkstra from ``source``.

    Stops after ``max_settled`` vertices, or before settling a vertex beyond
    ``t_max``, or right after settling a vertex with ``target[v]`` set
    (``target`` may be empty).  Ties in the frontier go to the lower index.

    Returns ``(dist, parent, hops, order, settled_count, hit_target)``.
    Unsettled vertices keep tentative values.
    """
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    hops = np.zeros(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    rem = np.empty(n, dtype=np.int64)
    r = 0
    for v in range(n):
        if v != source:
            rem[r] = v
            r += 1
    dist[source] = 0.0
    has_target = target.shape[0] > 0
    use_table = table.shape[0] > 0
    rk = nb_row_hashes(key, 0 if use_table else n)
    u = source
    count = 0
    hit = False
    while True:
        order[count] = u
        count += 1
        if has_target and target[u]:
            hit = True
            break
        if count >= max_settled or r == 0:
            break
        du = dist[u]
        hu = hops[u] + 1
        best = np.inf
        bi = -1
        for idx in range(r):
            v = rem[idx]
            if use_table:
                nd = du + table[u, v]
                if nd < dist[v]:
                    dist[v] = nd
                    parent[v] = u
                    hops[v] = hu
            else:
                gap = dist[v] - du
                if u < v:
                    word = nb_mix64(rk[u] + np.uint64(v) * np.uint64(_KEY2))
                else:
                    word = nb_mix64(rk[v] + np.uint64(u) * np.uint64(_KEY2))
                x = float(word >> np.uint64(11)) * UNIT
                # -log(x) >= 1 - x: most pairs are rejected without the log
                if mean * (1.0 - x) < gap:
                    if x == 0.0:
                        x = UNIT
                    nd = du - mean * math.log(x)
                    if nd < dist[v]:
                        dist[v] = nd
                        parent[v] = u
                        hops[v] = hu
            dv = dist[v]
            if dv < best or (dv == best and bi >= 0 and v < rem[bi]):
                best = dv
                bi = idx
        if best > t_max:
            break
        u = rem[bi]
        r -= 1
        rem[bi] = rem[r]
    return dist, parent, hops, order[:count], count, hit


_EMPTY_BOOL = np.zeros(0, dtype=np.bool_)


@nb.njit(cache=True)
def full_tree(table, key, mean, n, source):
    return sssp(table, key, mean, n, source, n, np.inf, _EMPTY_BOOL)


@nb.njit(cache=True)
def all_pairs(table, key, mean, n):
    """Distance and hop matrices from one full tree per source."""
    d = np.empty((n, n))
    h = np.empty((n, n), dtype=np.int32)
    for s in range(n):
        dist, _, hops, _, _, _ = full_tree(table, key, mean, n, s)
        d[s] = dist
        h[s] = hops
    return d, h


@nb.njit(cache=True)
def sources_max(table, key, mean, n, sources, restrict):
    """For each source, the farthest vertex (within ``restrict`` if nonempty).

    Returns ``(value, argmax, max_hops)`` arrays aligned with ``sources``.
    """
    m = sources.shape[0]
    val = np.empty(m)
    arg = np.empty(m, dtype=np.int64)
    mh = np.empty(m, dtype=np.int64)
    for a in range(m):
        dist, _, hops, _, _, _ = full_tree(table, key, mean, n, sources[a])
        best = -1.0
        bi = -1
        if restrict.shape[0] > 0:
            for b in range(restrict.shape[0]):
                v = restrict[b]
                if dist[v] > best:
                    best = dist[v]
                    bi = v
        else:
            for v in range(n):
                if dist[v] > best:
                    best = dist[v]
                    bi = v
        val[a] = best
        arg[a] = bi
        mh[a] = hops.max()
    return val, arg, mh


@nb.njit(cache=True)
def row_minima(table):
    n = table.shape[0]
    out = np.empty(n)
    for i in range(n):
        m = np.inf
        for j in range(n):
            if table[i, j] < m:
                m = table[i, j]
        out[i] = m
    return out


@nb.njit(cache=True)
def count_bad(d, xmin, lo_thresh, hi_thresh, d_thresh):
    n = d.shape[0]
    c = 0
    for i in range(n):
        if xmin[i] > lo_thresh:
            continue
        for j in range(n):
            if j != i and xmin[j] <= hi_thresh and d[i, j] >= d_thresh:
                c += 1
    return c

