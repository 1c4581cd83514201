"""Exact finite-n representations of exploration distances, and closed forms.

Exploring the complete graph from a set of ``k`` reached vertices, the next
vertex arrives after an exponential time of mean ``n / (k (n - k))`` and is
uniform among the unreached ones.  Distances between disjoint sets are
therefore a random number of independent terms, the number being an urn
waiting time.  These samplers act as oracles for the graph simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core_random import StreamLike, as_sampler


@dataclass(frozen=True)
class UrnSpec:
    black: int
    white: int

    def __post_init__(self):
        if self.black < 0 or self.white < 0:
            raise ValueError("ball counts must be nonnegative")
        if self.black + self.white < 1:
            raise ValueError("empty urn")


@dataclass(frozen=True)
class SetDistanceSample:
    distance: float
    steps: int


def urn_waiting_pmf(spec: UrnSpec) -> np.ndarray:
    """``pmf[k-1] = P(N = k)`` for k = 1 .. white+1, by the survival recursion."""
    b, w = spec.black, spec.white
    if b < 1:
        raise ValueError("need at least one black ball")
    surv = np.ones(w + 2)
    for k in range(1, w + 2):
        i = k - 1
        surv[k] = surv[k - 1] * max(w - i, 0) / (b + w - i)
    return surv[:-1] - surv[1:]


def sample_urn_waiting_time(source: StreamLike, spec: UrnSpec) -> int:
    """Draws (without replacement) until the first black ball, inclusive."""
    if spec.black < 1:
        raise ValueError("need at least one black ball")
    rng = as_sampler(source)
    b, w = spec.black, spec.white
    # the first black ball's position is 1 + (whites ahead of it); draw it
    # sequentially: each draw is black with probability b / remaining
    k = 1
    remaining_white = w
    while remaining_white > 0:
        if rng.uniform() * (b + remaining_white) < b:
            return k
        remaining_white -= 1
        k += 1
    return k


def _exploration_sum(rng, n: int, start: int, steps: int, mean: float) -> float:
    """``sum_{k=start}^{start+steps-1} E_k / (k (n - k))`` with E_k of the given mean."""
    if steps == 0:
        return 0.0
    e = np.asarray(rng.exponential(mean, steps), dtype=np.float64)
    if e.size != steps:
        raise ValueError("sampler returned too few exponentials")
    k = np.arange(start, start + steps, dtype=np.float64)
    total = 0.0
    for term in e / (k * (n - k)):
        total += term
    return total


def sample_set_distance(source: StreamLike, n: int, a_size: int, b_size: int) -> SetDistanceSample:
    """Distance between disjoint vertex sets of the given sizes."""
    if a_size < 1 or b_size < 1 or a_size + b_size > n:
        raise ValueError("infeasible set sizes")
    rng = as_sampler(source)
    steps = sample_urn_waiting_time(rng, UrnSpec(b_size, n - a_size - b_size))
    d = _exploration_sum(rng, n, a_size, steps, float(n))
    return SetDistanceSample(d, steps)


def sample_two_point_distance(source: StreamLike, n: int) -> float:
    """Distance between two fixed vertices: ``N`` uniform on ``1..n-1``."""
    if n < 2:
        raise ValueError("need n >= 2")
    rng = as_sampler(source)
    steps = int(rng.integers(1, n))
    return _exploration_sum(rng, n, 1, steps, float(n))


def sample_min_pair_sum(source: StreamLike, n: int) -> tuple[float, int]:
    """Sum ``sum_{k=2}^{N-1} n E'_k / (k (n - k))`` with mean-one ``E'_k``.

    ``N`` is the smaller of two distinct positions drawn uniformly from the
    ``n - 2`` exploration slots ``2 .. n-1``.  Returns ``(value, N)``.
    """
    if n < 5:
        raise ValueError("need n >= 5")
    rng = as_sampler(source)
    a = int(rng.integers(2, n))
    b = int(rng.integers(2, n - 1))
    if b >= a:
        b += 1
    steps = min(a, b)
    return n * _exploration_sum(rng, n, 2, steps - 2, 1.0), steps


def min_pair_pmf(n: int) -> dict[int, float]:
    """Law of ``min`` of a uniform distinct pair from ``2 .. n-1``, by enumeration."""
    slots = range(2, n)
    pmf: dict[int, float] = {}
    pairs = 0
    for a in slots:
        for b in slots:
            if a < b:
                pmf[a] = pmf.get(a, 0) + 1
                pairs += 1
    return {k: v / pairs for k, v in pmf.items()}


def tail_bound_constant(a: float) -> float:
    """``2 * int_0^1 u^a (1 - u)^(1 - a) du`` = ``2 B(a+1, 2-a)``, by quadrature."""
    if not 0 < a < 2:
        raise ValueError("a must lie in (0, 2)")
    # the endpoint powers go into an algebraic weight, so the singularity at
    # u = 1 for a > 1 is integrated exactly
    val, _ = integrate.quad(lambda u: 1.0, 0.0, 1.0, weight="alg", wvar=(a, 1.0 - a),
                            epsabs=0.0, epsrel=1e-11, limit=200)
    return 2.0 * val


def expected_slow_count(n: int, alpha: float) -> float:
    """Mean number of vertices whose minimal incident weight is at least ``log n - alpha``."""
    if n < 2:
        raise ValueError("need n >= 2")
    return n * math.exp(-(n - 1) * (math.log(n) - alpha) / n)


def slow_count_correction(n: int, alpha: float) -> float:
    """The relative correction ``eps_n = exp((log n - alpha) / n) - 1``."""
    return math.expm1((math.log(n) - alpha) / n)


def stein_chen_bound(n: int, alpha: float) -> float:
    """Total-variation bound between the slow-vertex count and its Poisson limit."""
    if n < 2:
        raise ValueError("need n >= 2")
    eps = slow_count_correction(n, alpha)
    return 2.0 * (1.0 + eps) * math.exp(2.0 * alpha) * math.log(n) / n
