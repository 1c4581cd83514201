"""Reproducible randomness.

Every random quantity in the package descends from a :class:`RandomStream`,
an immutable ``(master_seed, path)`` value.  Two kinds of draws hang off it:

* sequential draws through a :class:`Sampler` (Philox-backed numpy
  generator keyed by the stream), used for variable-length output such as
  point processes and urn draws;
* keyed draws, where a value is a pure function of the stream key and an
  integer index tuple.  Edge weights and pair Gumbels use these so that any
  entry can be re-evaluated without storing the rest.

Exponentials are parameterised by their *mean* throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numba as nb
import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_KEY2 = 0xD1B54A32D192ED03
# spacing of the 53-bit uniform grid; also the value the zero word maps to
UNIT = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finaliser on Python ints (wraps to 64 bits)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_key(parent_key: int, label: int) -> int:
    return mix64(parent_key ^ mix64((label + _GOLDEN) & MASK64))


@nb.njit(cache=True, inline="always")
def nb_mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def nb_derive_key(parent_key, label):
    return nb_mix64(parent_key ^ nb_mix64(np.uint64(label) + np.uint64(_GOLDEN)))


@nb.njit(cache=True, inline="always")
def nb_word(key, a, b):
    """64-bit word keyed by ``(key, a, b)`` for nonnegative integers a, b."""
    h = nb_mix64(key ^ nb_mix64(np.uint64(a) * np.uint64(_GOLDEN) + np.uint64(1)))
    return nb_mix64(h + np.uint64(b) * np.uint64(_KEY2))


@nb.njit(cache=True)
def nb_row_hashes(key, n):
    """Per-vertex prefixes ``h`` with ``nb_word(key, a, b) = mix(h[a] + b K2)``."""
    out = np.empty(n, dtype=np.uint64)
    for a in range(n):
        out[a] = nb_mix64(key ^ nb_mix64(np.uint64(a) * np.uint64(_GOLDEN) + np.uint64(1)))
    return out


@nb.njit(cache=True, inline="always")
def nb_word_to_open_unit(w):
    u = float(w >> np.uint64(11)) * UNIT
    if u == 0.0:
        u = UNIT
    return u


@nb.njit(cache=True, inline="always")
def nb_uniform(key, a, b):
    return nb_word_to_open_unit(nb_word(key, a, b))


@dataclass(frozen=True)
class RandomStream:
    """Immutable identifier of a reproducible random sequence."""

    master_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must fit in 64 bits")
        for label in self.path:
            if not 0 <= label <= MASK64:
                raise ValueError("stream labels must fit in 64 bits")

    def derive(self, label: int) -> "RandomStream":
        return RandomStream(self.master_seed, self.path + (label,))

    @property
    def key(self) -> int:
        k = mix64(self.master_seed ^ 0x5851F42D4C957F2D)
        for label in self.path:
            k = derive_key(k, label)
        return k

    def sampler(self) -> "Sampler":
        """A fresh sequential sampler positioned at the start of this stream."""
        return Sampler(self)


def derive_stream(parent: RandomStream, label: int) -> RandomStream:
    return parent.derive(label)


class Sampler:
    """Sequential draws from a stream.

    Not thread-safe: one sampler must stay within one execution context.
    """

    def __init__(self, stream: RandomStream):
        self.stream = stream
        k = stream.key
        self._bitgen = np.random.Philox(key=np.array([k, mix64(k ^ _KEY2)], dtype=np.uint64))
        self.generator = np.random.Generator(self._bitgen)

    def uniform(self, size=None):
        """Uniform on the open interval (0, 1)."""
        m = 1 if size is None else size
        words = self._bitgen.random_raw(m)
        u = (words >> np.uint64(11)).astype(np.float64) * UNIT
        u[u == 0.0] = UNIT
        return float(u[0]) if size is None else u

    def exponential(self, mean: float, size=None):
        return -mean * np.log(self.uniform(size))

    def gumbel(self, size=None):
        return -np.log(-np.log(self.uniform(size)))

    def integers(self, low: int, high: int, size=None):
        """Integers in ``[low, high)``."""
        return self.generator.integers(low, high, size=size)

    def poisson(self, lam: float, size=None):
        return self.generator.poisson(lam, size=size)

    def binomial(self, trials: int, p: float, size=None):
        return self.generator.binomial(trials, p, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def child_key(self, label: int) -> int:
        """A fresh key for keyed (hash-indexed) draws.

        Consumes one word, so a sampler reused across replicates never
        hands out the same key twice.
        """
        return derive_key(int(self._bitgen.random_raw()), label)


class StubExhausted(RuntimeError):
    pass


@dataclass
class StubSampler:
    """Sampler replaying prescribed values, for tests with injected randomness.

    Each kind keeps its own queue.  Values are returned verbatim: a stub
    exponential is already on the scale of the requested mean.  A request
    for ``size`` values returns whatever remains if fewer are queued, and
    raises :class:`StubExhausted` once a queue is empty.
    """

    uniforms: list = field(default_factory=list)
    exponentials: list = field(default_factory=list)
    gumbels: list = field(default_factory=list)
    ints: list = field(default_factory=list)
    poissons: list = field(default_factory=list)
    keys: list = field(default_factory=list)

    def _take(self, queue: list, size):
        if not queue:
            raise StubExhausted("stub queue exhausted")
        if size is None:
            return queue.pop(0)
        out = np.asarray(queue[:size], dtype=float)
        del queue[:size]
        return out

    def uniform(self, size=None):
        return self._take(self.uniforms, size)

    def exponential(self, mean: float, size=None):
        return self._take(self.exponentials, size)

    def gumbel(self, size=None):
        return self._take(self.gumbels, size)

    def integers(self, low: int, high: int, size=None):
        v = self._take(self.ints, size)
        return int(v) if size is None else v.astype(np.int64)

    def poisson(self, lam: float, size=None):
        v = self._take(self.poissons, size)
        return int(v) if size is None else v.astype(np.int64)

    def binomial(self, trials: int, p: float, size=None):
        return self.integers(0, trials + 1, size)

    def permutation(self, n: int) -> np.ndarray:
        return np.arange(n)

    def child_key(self, label: int) -> int:
        return self._take(self.keys, None) if self.keys else label


SamplerLike = Union[Sampler, StubSampler]
StreamLike = Union[RandomStream, Sampler, StubSampler]


def as_sampler(source: StreamLike) -> SamplerLike:
    """A stream becomes a fresh sampler; a sampler is used (and advanced) as is."""
    if isinstance(source, RandomStream):
        return source.sampler()
    return source


def sample_exponential(source: StreamLike, mean: float, size=None):
    """Exponential draw(s) with the given *mean* (rate ``1/mean``)."""
    if not mean > 0:
        raise ValueError("mean must be positive")
    return as_sampler(source).exponential(mean, size)


def sample_gumbel(source: StreamLike, size=None):
    """Standard Gumbel draw(s), CDF ``exp(-exp(-x))``."""
    return as_sampler(source).gumbel(size)


def sample_ppp(source: StreamLike, gamma: float, floor: float) -> np.ndarray:
    """Points ``Y_1 > Y_2 > ... >= floor`` of a Poisson process with density
    ``gamma * exp(-y)``.

    The images ``S = gamma * exp(-Y)`` form a unit-rate process on the
    half-line, so the points come from partial sums of unit exponentials,
    stopping at the first partial sum beyond ``gamma * exp(-floor)``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    sampler = as_sampler(source)
    limit = gamma * math.exp(-floor)
    chunk = int(limit + 4.0 * math.sqrt(limit) + 16)
    total = 0.0
    pieces = []
    while True:
        e = np.asarray(sampler.exponential(1.0, chunk), dtype=float)
        s = total + np.cumsum(e)
        stop = np.searchsorted(s, limit, side="right")
        if stop < len(s):
            pieces.append(s[:stop])
            break
        pieces.append(s)
        total = float(s[-1]) if len(s) else total
        chunk = max(16, chunk // 4)
    partial = np.concatenate(pieces) if pieces else np.empty(0)
    return -np.log(partial / gamma)


class EdgeWeightOracle:
    """Exponential edge weights on the complete graph, evaluated on demand.

    ``weight(i, j)`` is a pure function of the stream key and the unordered
    pair, so nothing is stored.  Vertices are ``0 .. n-1``.
    """

    def __init__(self, n: int, stream: RandomStream, mean: float | None = None):
        if n < 2:
            raise ValueError("need n >= 2")
        self.n = n
        self.mean = float(n if mean is None else mean)
        if not self.mean > 0:
            raise ValueError("mean must be positive")
        self.stream = stream
        self.key = np.uint64(stream.key)

    def _check(self, i: int, j: int):
        if i == j:
            raise ValueError("no self-loops")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError("vertex out of range")

    def weight(self, i: int, j: int) -> float:
        self._check(i, j)
        return float(_pair_weight(self.key, self.mean, i, j))

    def row(self, i: int) -> np.ndarray:
        """Weights from ``i`` to every vertex; ``inf`` on the diagonal."""
        if not 0 <= i < self.n:
            raise IndexError("vertex out of range")
        return _row(self.key, self.mean, self.n, i)

    def matrix(self) -> np.ndarray:
        return _matrix(self.key, self.mean, self.n)

    def kernel_args(self):
        return self.key, self.mean, _NO_TABLE


class TableOracle:
    """Explicit weight table, for hand-built instances and relabelled copies."""

    def __init__(self, table):
        t = np.array(table, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
            raise ValueError("table must be square with n >= 2")
        if not np.allclose(t, t.T, equal_nan=True):
            raise ValueError("table must be symmetric")
        np.fill_diagonal(t, np.inf)
        self.n = t.shape[0]
        self.table = t

    @classmethod
    def trusted(cls, table: np.ndarray) -> "TableOracle":
        """Wrap a symmetric table with an ``inf`` diagonal without copying or checks."""
        self = cls.__new__(cls)
        self.n = table.shape[0]
        self.table = table
        return self

    @classmethod
    def from_edges(cls, n: int, edges: dict) -> "TableOracle":
        t = np.full((n, n), np.inf)
        for (i, j), w in edges.items():
            t[i, j] = t[j, i] = w
        return cls(t)

    def weight(self, i: int, j: int) -> float:
        if i == j:
            raise ValueError("no self-loops")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError("vertex out of range")
        return float(self.table[i, j])

    def row(self, i: int) -> np.ndarray:
        return self.table[i].copy()

    def matrix(self) -> np.ndarray:
        return self.table.copy()

    def relabel(self, perm: Sequence[int]) -> "TableOracle":
        """Copy whose vertex ``k`` is this oracle's vertex ``perm[k]``."""
        p = np.asarray(perm)
        return TableOracle(self.table[np.ix_(p, p)])

    def kernel_args(self):
        return np.uint64(0), 1.0, self.table


def materialize(oracle) -> TableOracle:
    if isinstance(oracle, TableOracle):
        return oracle
    return TableOracle.trusted(oracle.matrix())


def edge_weight(oracle, i: int, j: int) -> float:
    return oracle.weight(i, j)


_NO_TABLE = np.empty((0, 0), dtype=np.float64)


@nb.njit(cache=True, inline="always")
def _pair_weight(key, mean, i, j):
    if i > j:
        i, j = j, i
    return -mean * math.log(nb_uniform(key, i, j))


@nb.njit(cache=True)
def _row(key, mean, n, i):
    out = np.empty(n)
    for j in range(n):
        out[j] = np.inf if j == i else _pair_weight(key, mean, i, j)
    return out


@nb.njit(cache=True)
def _matrix(key, mean, n):
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = np.inf
        for j in range(i + 1, n):
            w = _pair_weight(key, mean, i, j)
            out[i, j] = w
            out[j, i] = w
    return out
