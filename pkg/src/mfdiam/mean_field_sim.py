"""Finite-n simulation on the complete graph with exponential edge weights.

All routines take an oracle (:class:`~mfdiam.core_random.EdgeWeightOracle`
or :class:`~mfdiam.core_random.TableOracle`).  Vertices are ``0 .. n-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels as K
from .core_random import (EdgeWeightOracle, RandomStream, StreamLike, as_sampler,
                          materialize)

DEFAULT_EXACT_BUDGET = 4000

_NO_TARGET = np.zeros(0, dtype=np.bool_)
_NO_RESTRICT = np.zeros(0, dtype=np.int64)


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SmallestWeightTree:
    source: int
    dist: np.ndarray
    parent: np.ndarray
    hops: np.ndarray
    order: np.ndarray

    def path(self, target: int) -> list[int]:
        """Vertices of the geodesic from the source to ``target``, inclusive."""
        out = [target]
        v = target
        while v != self.source:
            v = int(self.parent[v])
            if v < 0:
                raise ValueError("target not reached")
            out.append(v)
        return out[::-1]

    def check(self, oracle) -> None:
        """Raise if any tree invariant fails."""
        n = self.dist.size
        if self.dist[self.source] != 0 or self.hops[self.source] != 0:
            raise AssertionError("source labels wrong")
        for v in range(n):
            if v == self.source:
                continue
            p = int(self.parent[v])
            if p < 0:
                raise AssertionError(f"vertex {v} has no parent")
            if self.dist[v] != self.dist[p] + oracle.weight(p, v):
                raise AssertionError(f"distance of {v} inconsistent with its parent")
            if self.hops[v] != self.hops[p] + 1:
                raise AssertionError(f"hop count of {v} inconsistent")
            if not self.dist[v] > self.dist[p]:
                raise AssertionError(f"distances not increasing along the path to {v}")


def _run(oracle, source, max_settled=None, t_max=math.inf, target=_NO_TARGET):
    n = oracle.n
    if not 0 <= source < n:
        raise IndexError("source out of range")
    key, mean, table = oracle.kernel_args()
    return K.sssp(table, key, mean, n, source, n if max_settled is None else max_settled,
                  t_max, target)


def smallest_weight_tree(oracle, source: int) -> SmallestWeightTree:
    dist, parent, hops, order, _, _ = _run(oracle, source)
    return SmallestWeightTree(source, dist, parent, hops, order)


def reference_tree(table: np.ndarray, source: int) -> tuple[np.ndarray, np.ndarray]:
    """Textbook O(n^2) Dijkstra over a materialised table, in plain Python."""
    n = table.shape[0]
    dist = [math.inf] * n
    parent = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    for _ in range(n):
        u = min((v for v in range(n) if not done[v]), key=lambda v: (dist[v], v))
        done[u] = True
        for v in range(n):
            if not done[v] and v != u and dist[u] + table[u][v] < dist[v]:
                dist[v] = dist[u] + table[u][v]
                parent[v] = u
    return np.array(dist), np.array(parent)


def point_geodesic(oracle, i: int, j: int) -> tuple[float, int]:
    """``(d_w(i, j), hopcount)``, stopping the exploration from ``i`` once ``j`` settles."""
    if i == j:
        raise ValueError("endpoints must differ")
    target = np.zeros(oracle.n, dtype=np.bool_)
    target[j] = True
    dist, _, hops, *_ = _run(oracle, i, target=target)
    return float(dist[j]), int(hops[j])


def point_distance(oracle, i: int, j: int) -> float:
    return point_geodesic(oracle, i, j)[0]


class StopReason(str, Enum):
    SIZE = "size reached"
    TIME = "time reached"
    TARGET = "target hit"


@dataclass(frozen=True)
class SwgTrace:
    """Arrival times of the smallest-weight graph grown from ``source``.

    ``times[k]`` is when the ``(k+2)``-th vertex joins (the source is
    present from time 0 and is not listed).
    """

    source: int
    times: np.ndarray
    vertices: np.ndarray
    stop_reason: StopReason

    @property
    def events(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.vertices.tolist()))

    def size_at(self, t: float) -> int:
        return 1 + int(np.searchsorted(self.times, t, side="right"))


def swg_growth(oracle, source: int, *, size: int | None = None, time: float | None = None,
               targets=None) -> SwgTrace:
    """Grow the cluster until it has ``size`` vertices, reaches ``time``, or hits ``targets``."""
    if sum(x is not None for x in (size, time, targets)) != 1:
        raise ValueError("give exactly one stopping rule")
    target = _NO_TARGET
    if targets is not None:
        targets = list(targets)
        if not targets:
            raise ValueError("empty target set")
        target = np.zeros(oracle.n, dtype=np.bool_)
        target[targets] = True
        if target[source]:
            raise ValueError("target set contains the source")
    if size is not None and not 1 <= size <= oracle.n:
        raise ValueError("size out of range")
    dist, _, _, order, count, hit = _run(
        oracle, source, max_settled=size, t_max=math.inf if time is None else time, target=target)
    vs = order[1:count]
    if hit:
        reason = StopReason.TARGET
    elif time is not None:
        reason = StopReason.TIME
    else:
        reason = StopReason.SIZE
    return SwgTrace(source, dist[vs], vs, reason)


def set_distance(oracle, source: int, targets) -> tuple[float, int]:
    """``(d_w({source}, B), vertices reached outside B)`` via the cluster from ``source``."""
    tr = swg_growth(oracle, source, targets=targets)
    return float(tr.times[-1]), len(tr.times) - 1


def flooding(oracle, source: int) -> float:
    return float(smallest_weight_tree(oracle, source).dist.max())


@dataclass(frozen=True)
class DiameterResult:
    value: float
    pair: tuple[int, int]
    mode: str
    sources_explored: int


_as_table = materialize


def diameter_exact(oracle, budget: int = DEFAULT_EXACT_BUDGET) -> DiameterResult:
    """Maximum over all pairs, one full tree per source."""
    n = oracle.n
    if n > budget:
        raise BudgetExceeded(f"n={n} exceeds the exact-mode budget {budget}")
    t = _as_table(oracle)
    val, arg, _ = K.sources_max(t.table, np.uint64(0), 1.0, n, np.arange(n, dtype=np.int64),
                                _NO_RESTRICT)
    s = int(np.argmax(val))
    i, j = sorted((s, int(arg[s])))
    return DiameterResult(float(val[s]), (i, j), "exact", n)


@dataclass(frozen=True)
class MinEdgeProfile:
    x_min: np.ndarray
    order: np.ndarray


def min_edge_profile(oracle) -> MinEdgeProfile:
    """Minimal incident weight per vertex, with vertices sorted slowest first."""
    x = K.row_minima(_as_table(oracle).table)
    # stable sort on -x keeps ties in ascending index order
    order = np.argsort(-x, kind="stable")
    return MinEdgeProfile(x, order)


def default_candidates(n: int) -> int:
    return max(2, math.ceil(4 * math.log(n)))


def diameter_candidate(oracle, k_candidates: int | None = None) -> DiameterResult:
    """Largest distance from the ``k`` vertices with the largest minimal weight.

    Only candidate sources are explored, but every vertex counts as a
    target: the trees are complete anyway, and one slow endpoint is enough
    to catch the diameter.  The value never exceeds the exact diameter.
    """
    n = oracle.n
    k = default_candidates(n) if k_candidates is None else k_candidates
    if k < 2:
        raise ValueError("need at least two candidates")
    if k > n:
        raise ValueError("more candidates than vertices")
    t = _as_table(oracle)
    prof = min_edge_profile(t)
    cand = np.ascontiguousarray(prof.order[:k], dtype=np.int64)
    val, arg, _ = K.sources_max(t.table, np.uint64(0), 1.0, n, cand, _NO_RESTRICT)
    s = int(np.argmax(val))
    i, j = sorted((int(cand[s]), int(arg[s])))
    return DiameterResult(float(val[s]), (i, j), "candidate", k)


def count_slow(profile: MinEdgeProfile, n: int, alpha: float) -> int:
    return int(np.count_nonzero(profile.x_min >= math.log(n) - alpha))


def sample_slow_count(source: StreamLike, n: int, alpha: float) -> int:
    """One draw of the number of vertices whose minimal incident weight is at
    least ``log n - alpha``, without building the graph.

    A vertex is slow iff none of its edges is shorter than the threshold.
    Edges are short independently with probability ``p``, so the count is
    the number of isolated vertices of the graph of short edges: draw how
    many edges are short, place them on distinct uniform pairs, count the
    untouched vertices.  Cost is O(n p n) instead of O(n^2).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    thr = math.log(n) - alpha
    if thr <= 0:
        return n
    rng = as_sampler(source)
    p = -math.expm1(-thr / n)
    pairs = n * (n - 1) // 2
    m = int(rng.binomial(pairs, p))
    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < m:
        need = m - chosen.size
        i = np.asarray(rng.integers(0, n, need), dtype=np.int64)
        j = np.asarray(rng.integers(0, n - 1, need), dtype=np.int64)
        j += j >= i
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        # np.unique sorts, which is fine: only the set of short edges matters
        chosen = np.unique(np.concatenate([chosen, lo * n + hi]))
    touched = np.zeros(n, dtype=bool)
    touched[chosen // n] = True
    touched[chosen % n] = True
    return int(n - np.count_nonzero(touched))


def all_pairs_distances(oracle) -> tuple[np.ndarray, np.ndarray]:
    """Distance and hop-count matrices."""
    t = _as_table(oracle)
    return K.all_pairs(t.table, np.uint64(0), 1.0, t.n)


def count_bad_pairs(distances: np.ndarray, profile: MinEdgeProfile, n: int, alpha: float) -> int:
    """Ordered pairs with a fast first vertex, a not-too-slow second vertex and
    a distance still close to the diameter scale."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if distances is None or distances.shape != (n, n):
        raise ValueError("all-pairs distances required")
    ln = math.log(n)
    return int(K.count_bad(distances, profile.x_min, ln - alpha, ln + alpha / 2, 3 * ln - alpha / 8))


def hopcount_stats(tree: SmallestWeightTree, source: StreamLike) -> tuple[int, int]:
    """(hops to a uniform non-source target, maximal hop count)."""
    n = tree.hops.size
    t = int(as_sampler(source).integers(0, n - 1))
    if t >= tree.source:
        t += 1
    return int(tree.hops[t]), int(tree.hops.max())


def max_hopcount(hops: np.ndarray) -> int:
    """Largest hop count in an all-pairs hop matrix (or stack of trees)."""
    return int(np.max(hops))


def alpha_star(tol: float = 1e-12) -> float:
    """Root above ``e`` of ``x log x - x = 1`` (the maximal-hopcount constant)."""
    from scipy.optimize import brentq
    return brentq(lambda x: x * math.log(x) - x - 1.0, math.e, 10.0, xtol=tol)


def joint_distance_experiment(oracle, m: int) -> tuple[np.ndarray, bool]:
    """Recentred distances among vertices ``0 .. m-1`` and whether any of them
    lies inside another pair's geodesic.

    Returns an ``(m, m)`` array with entries above the diagonal filled
    (``nan`` elsewhere).
    """
    n = oracle.n
    if m < 2:
        raise ValueError("need m >= 2")
    if m > n:
        raise ValueError("m exceeds n")
    ln = math.log(n)
    out = np.full((m, m), np.nan)
    interior = False
    for a in range(m - 1):
        dist, parent, _, _, _, _ = _run(oracle, a)
        for b in range(a + 1, m):
            out[a, b] = dist[b] - ln
            v = int(parent[b])
            while v != a:
                if v < m:
                    interior = True
                v = int(parent[v])
    return out, interior


@dataclass(frozen=True)
class ConditionalSlowResult:
    distances: list[list[float]]
    attempts: int

    @property
    def accepted(self) -> int:
        return len(self.distances)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts

    def pooled(self) -> np.ndarray:
        return np.array([d for inst in self.distances for d in inst])


def conditional_slow_experiment(stream: RandomStream, n: int, alpha: float, m: int,
                                budget: int) -> ConditionalSlowResult:
    """Rejection sampling of instances with exactly ``m`` slow vertices.

    Instance ``r`` uses ``stream.derive(r)``; ``budget`` instances are tried.
    Each accepted instance contributes ``d_w(V_i, V_j) - 3 log n + 2 alpha``
    over its ``m(m-1)/2`` slow pairs.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    ln = math.log(n)
    accepted: list[list[float]] = []
    for r in range(budget):
        t = materialize(EdgeWeightOracle(n, stream.derive(r)))
        prof = min_edge_profile(t)
        slow = np.flatnonzero(prof.x_min >= ln - alpha)
        if slow.size != m:
            continue
        slow = np.sort(slow)
        vals = []
        for a in range(m - 1):
            dist, *_ = _run(t, int(slow[a]))
            vals.extend(float(dist[b]) - 3 * ln + 2 * alpha for b in slow[a + 1:])
        accepted.append(vals)
    if not accepted:
        raise BudgetExceeded("no instance accepted within the attempt budget")
    return ConditionalSlowResult(accepted, budget)
