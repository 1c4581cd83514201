"""Per-replicate experiment functions and a scheduling-independent runner.

Replicate ``r`` of an experiment always reads ``stream.derive(r)``, so the
results do not depend on how replicates are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import limit_lab, mean_field_sim as mfs
from .core_random import EdgeWeightOracle, RandomStream, materialize

# stream labels inside a replicate
_GRAPH, _TARGET = 0, 1


def run_replicates(fn: Callable, stream: RandomStream, count: int, workers: int = 1,
                   start: int = 0) -> list:
    """``[fn(stream.derive(r)) for r in start .. start+count-1]``, possibly in parallel."""
    streams = [stream.derive(r) for r in range(start, start + count)]
    if workers <= 1 or count < 2:
        return [fn(s) for s in streams]
    chunk = max(1, count // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams, chunksize=chunk))


def graph(stream: RandomStream, n: int) -> EdgeWeightOracle:
    return EdgeWeightOracle(n, stream.derive(_GRAPH))


def _uniform_target(stream: RandomStream, n: int, source: int = 0) -> int:
    t = int(stream.derive(_TARGET).sampler().integers(0, n - 1))
    return t + 1 if t >= source else t


# -- replicate functions (module level so they pickle) ------------------------

def two_point_replicate(stream: RandomStream, n: int) -> float:
    return mfs.point_distance(graph(stream, n), 0, 1)


def flooding_replicate(stream: RandomStream, n: int) -> float:
    return mfs.flooding(graph(stream, n), 0)


def diameter_replicate(stream: RandomStream, n: int, mode: str, candidates: int | None,
                       budget: int) -> mfs.DiameterResult:
    g = graph(stream, n)
    if mode == "exact":
        return mfs.diameter_exact(g, budget)
    if mode == "candidate":
        k = min(n, mfs.default_candidates(n) if candidates is None else candidates)
        return mfs.diameter_candidate(g, k)
    raise ValueError(f"unknown mode {mode!r}")


def hopcount_replicate(stream: RandomStream, n: int) -> tuple[int, int]:
    """(hops to a uniform target, maximal hop count) from vertex 0."""
    tree = mfs.smallest_weight_tree(graph(stream, n), 0)
    t = _uniform_target(stream, n)
    return int(tree.hops[t]), int(tree.hops.max())


def typical_hop_replicate(stream: RandomStream, n: int) -> int:
    """Same target as :func:`hopcount_replicate`, exploring only until it settles."""
    return mfs.point_geodesic(graph(stream, n), 0, _uniform_target(stream, n))[1]


def set_distance_replicate(stream: RandomStream, n: int, b_size: int) -> float:
    return mfs.set_distance(graph(stream, n), 0, range(1, b_size + 1))[0]


def joint_replicate(stream: RandomStream, n: int, m: int):
    return mfs.joint_distance_experiment(graph(stream, n), m)


def slow_count_replicate(stream: RandomStream, n: int, alpha: float) -> int:
    return mfs.sample_slow_count(stream, n, alpha)


def all_pairs_replicate(stream: RandomStream, n: int, alpha: float,
                        candidates: int | None = None) -> tuple[int, float, float]:
    """(bad pairs, exact diameter, candidate-mode diameter) of one instance."""
    t = materialize(graph(stream, n))
    d, _ = mfs.all_pairs_distances(t)
    prof = mfs.min_edge_profile(t)
    bad = mfs.count_bad_pairs(d, prof, n, alpha)
    k = min(n, mfs.default_candidates(n) if candidates is None else candidates)
    cand = mfs.diameter_candidate(t, k).value
    return bad, float(d.max()), cand


def xi_replicate(stream: RandomStream, gamma: float, inner: float, outer: float):
    return limit_lab.sample_xi(stream, gamma, inner, outer)


def xi_alpha_replicate(stream: RandomStream, alpha: float) -> float:
    return limit_lab.sample_xi_alpha(stream, alpha)


def q_replicate(stream: RandomStream, delta: float) -> float:
    return limit_lab.sample_q(stream, delta)


def bind(fn: Callable, **kw) -> Callable:
    return partial(fn, **kw)


def recentre(values: Sequence[float], n: int, factor: float) -> np.ndarray:
    return np.asarray(values, dtype=float) - factor * math.log(n)
