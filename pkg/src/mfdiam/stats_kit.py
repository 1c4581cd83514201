"""Empirical distributions and the statistics used to compare them."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .core_random import StreamLike, as_sampler


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=np.float64).ravel())
        if s.size == 0:
            raise ValueError("empty sample")
        if np.isnan(s).any():
            raise ValueError("NaN in sample")
        object.__setattr__(self, "samples", s)

    @property
    def count(self) -> int:
        return int(self.samples.size)

    def ecdf(self, x):
        """Right-continuous empirical CDF."""
        return np.searchsorted(self.samples, x, side="right") / self.count

    def mean(self) -> float:
        return float(self.samples.mean())

    def var(self) -> float:
        return float(self.samples.var(ddof=1)) if self.count > 1 else 0.0


def empirical(x) -> EmpiricalDistribution:
    return x if isinstance(x, EmpiricalDistribution) else EmpiricalDistribution(np.asarray(x))


@dataclass(frozen=True)
class IntegerHistogram:
    counts: Mapping[int, int]

    def __post_init__(self):
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("negative count")
        if self.total <= 0:
            raise ValueError("empty histogram")

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "IntegerHistogram":
        return cls(dict(Counter(int(v) for v in values)))

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))


def ks_two_sample(a, b) -> float:
    """Sup distance between the two empirical CDFs (exact, via a merged scan)."""
    a, b = empirical(a), empirical(b)
    grid = np.concatenate([a.samples, b.samples])
    return float(np.max(np.abs(a.ecdf(grid) - b.ecdf(grid))))


def ks_against_cdf(a, cdf: Callable) -> float:
    """One-sample Kolmogorov-Smirnov statistic D = max(D+, D-)."""
    a = empirical(a)
    f = np.asarray(cdf(a.samples), dtype=np.float64)
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("cdf is not monotone on the sample points")
    n = a.count
    # ties: the ECDF just after x is (last index of x + 1) / n
    hi = np.searchsorted(a.samples, a.samples, side="right") / n
    lo = np.searchsorted(a.samples, a.samples, side="left") / n
    return float(max(np.max(hi - f), np.max(f - lo), 0.0))


def ks_null_quantile(n1: int, n2: int | None = None, level: float = 0.01) -> float:
    """Asymptotic critical value of the KS statistic at the given level."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    eff = n1 if n2 is None else n1 * n2 / (n1 + n2)
    return c / math.sqrt(eff)


def tv_integer(h: IntegerHistogram, pmf: Callable[[int], float]) -> float:
    """Total variation between a histogram and a pmf on the integers.

    The pmf is queried on the histogram support and on ``0..max``; whatever
    mass it puts elsewhere is counted in full.
    """
    support = set(h.counts) | set(range(0, max(max(h.counts), 0) + 1))
    total = h.total
    dist = 0.0
    queried = 0.0
    for k in sorted(support):
        p = float(pmf(k))
        if p < 0:
            raise ValueError("negative pmf value")
        queried += p
        dist += abs(h.counts.get(k, 0) / total - p)
    if queried > 1 + 1e-9:
        raise ValueError("pmf mass exceeds one")
    dist += max(0.0, 1.0 - queried)
    return min(1.0, 0.5 * dist)


def bootstrap_ci(a, statistic: Callable, level: float, resamples: int,
                 source: StreamLike) -> tuple[float, float]:
    """Percentile bootstrap interval for ``statistic`` of the sample."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if resamples < 100:
        raise ValueError("need at least 100 resamples")
    x = empirical(a).samples
    rng = as_sampler(source)
    vals = np.empty(resamples)
    for r in range(resamples):
        idx = rng.integers(0, x.size, size=x.size)
        vals[r] = statistic(x[idx])
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(vals, [tail, 1.0 - tail])
    return float(lo), float(hi)


def mean_ci(x, level: float = 0.95) -> tuple[float, float, float]:
    """Normal-theory interval for a mean: (estimate, lo, hi)."""
    x = np.asarray(x, dtype=np.float64)
    m = float(x.mean())
    half = normal_quantile(0.5 + level / 2.0) * float(x.std(ddof=1)) / math.sqrt(x.size)
    return m, m - half, m + half


# -- reference distributions ------------------------------------------------

def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=np.float64)))


def normal_cdf(x):
    """Standard normal CDF through ``math.erf`` (error well below 1e-7)."""
    v = np.vectorize(lambda t: 0.5 * (1.0 + math.erf(t / math.sqrt(2.0))), otypes=[float])
    out = v(np.asarray(x, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def normal_quantile(p: float) -> float:
    from statistics import NormalDist
    return NormalDist().inv_cdf(p)


def poisson_pmf(k: int, mean: float) -> float:
    if mean < 0:
        raise ValueError("negative Poisson mean")
    if k < 0:
        return 0.0
    if mean == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))


def exponential_cdf(mean: float):
    return lambda x: np.where(np.asarray(x) > 0, -np.expm1(-np.asarray(x) / mean), 0.0)
