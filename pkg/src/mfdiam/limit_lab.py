"""Samplers and evaluators for the limiting objects of the recentred distances.

* ``D(m)``: the Gumbel array ``Lambda_a + Lambda_b - Lambda_ab``;
* ``Xi``: the maximum of ``Y_s + Y_t - Lambda_st`` over pairs of points of a
  Poisson process with density ``gamma * exp(-y)``, with i.i.d. Gumbel pair
  weights; ``Xi_alpha`` is its finite analogue built from ``Poisson(e^alpha)``
  shifted Gumbels;
* ``Q = exp(-Xi)``, written through partial sums ``S`` of unit exponentials
  as ``min S_s S_t / E_st``, and the tail ``P(Q > x)``.

Pair maxima are exact.  Pairs among the retained points above the inner
level are evaluated one by one from keyed Gumbels.  Pairs reaching below the
inner level almost never matter, so they are resolved by thinning: for a row
``s`` the pairs ``(s, t)`` beat the running maximum ``z`` independently with
probability ``exp(-exp(z - Y_s - Y_t))``, which decreases in ``t``; the
exceedances are located with geometric skips and their values drawn from the
Gumbel law conditioned on exceeding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import integrate, special

from .core_random import (RandomStream, StreamLike, StubExhausted, StubSampler, as_sampler,
                          nb_uniform, sample_ppp)
from .stats_kit import bootstrap_ci

NEG_INF = -math.inf

# labels of keyed sub-streams
_PAIRS, _THIN, _POINTS = 1, 2, 3


def sample_d_array(source: StreamLike, m: int) -> np.ndarray:
    """One draw of ``D(m)``, as an ``(m, m)`` array filled above the diagonal."""
    if m < 2:
        raise ValueError("need m >= 2")
    rng = as_sampler(source)
    vert = np.asarray(rng.gumbel(m), dtype=float)
    iu = np.triu_indices(m, 1)
    pair = np.asarray(rng.gumbel(len(iu[0])), dtype=float)
    out = np.full((m, m), np.nan)
    out[iu] = vert[iu[0]] + vert[iu[1]] - pair
    return out


def sample_d_entries(source: StreamLike, m: int, size: int) -> np.ndarray:
    """``size`` independent draws of ``D(m)``; columns follow ``np.triu_indices(m, 1)``."""
    if m < 2:
        raise ValueError("need m >= 2")
    rng = as_sampler(source)
    iu = np.triu_indices(m, 1)
    vert = rng.gumbel(size * m).reshape(size, m)
    pair = rng.gumbel(size * len(iu[0])).reshape(size, len(iu[0]))
    return vert[:, iu[0]] + vert[:, iu[1]] - pair


# -- exact pair maxima --------------------------------------------------------

@nb.njit(cache=True, inline="always")
def _gumbel_from(u):
    return -math.log(-math.log(u))


@nb.njit(cache=True, inline="always")
def _p_exceed(c, z):
    # P(c - Lambda > z) for a standard Gumbel Lambda
    if z == -np.inf:
        return 1.0
    return math.exp(-math.exp(z - c))


@nb.njit(cache=True)
def _pair_max_kernel(y, n_in, pair_key, thin_key):
    """Max of ``y[s] + y[t] - Lambda_st`` over ``s < t``; ``y`` descending.

    Returns ``(inner, is_, it_, outer, os_, ot_)``: the maximum over pairs
    within the first ``n_in`` points and the maximum over all pairs.
    """
    T = y.shape[0]
    z = -np.inf
    bs = -1
    bt = -1
    for s in range(n_in):
        for t in range(s + 1, n_in):
            v = y[s] + y[t] - _gumbel_from(nb_uniform(pair_key, s, t))
            if v > z:
                z = v
                bs = s
                bt = t
    inner, is_, it_ = z, bs, bt
    ctr = 0
    for s in range(T - 1):
        t = n_in if s < n_in else s + 1
        if t >= T:
            continue
        if _p_exceed(y[s] + y[t], z) == 0.0:
            if s < n_in:
                continue
            break
        while t < T:
            p = _p_exceed(y[s] + y[t], z)
            if p == 0.0:
                break
            if p > 0.5:
                lam = _gumbel_from(nb_uniform(thin_key, ctr, 0))
                ctr += 1
                v = y[s] + y[t] - lam
                if v > z:
                    z = v
                    bs = s
                    bt = t
                t += 1
                continue
            u = nb_uniform(thin_key, ctr, 0)
            ctr += 1
            g = math.log(u) / math.log1p(-p)
            # g can be inf when p is subnormal
            if not g < T - t:
                break
            t += int(g)
            c = y[s] + y[t]
            pt = _p_exceed(c, z)
            if nb_uniform(thin_key, ctr, 0) * p < pt:
                # Gumbel conditioned on lying below c - z: CDF value uniform on (0, pt)
                lam = _gumbel_from(nb_uniform(thin_key, ctr, 1) * pt)
                v = c - lam
                if v > z:
                    z = v
                    bs = s
                    bt = t
            ctr += 1
            t += 1
    return inner, is_, it_, z, bs, bt


def pair_max(points: np.ndarray, n_inner: int, pair_key: int, thin_key: int):
    """Python entry point of the exact pair maximum (see module docstring)."""
    y = np.ascontiguousarray(points, dtype=np.float64)
    return _pair_max_kernel(y, int(n_inner), np.uint64(pair_key), np.uint64(thin_key))


def brute_pair_max(points: np.ndarray, pair_key: int) -> tuple[float, int, int]:
    """Every pair evaluated from keyed Gumbels (reference for small inputs)."""
    y = np.asarray(points, dtype=np.float64)
    inner, s, t, *_ = _pair_max_kernel(y, y.size, np.uint64(pair_key), np.uint64(0))
    return inner, s, t


@dataclass(frozen=True)
class XiSample:
    """``inner_level`` and ``outer_level`` are the point cut-offs (negative)."""

    value: float
    inner_level: float
    outer_level: float
    stable: bool
    argpair: tuple[int, int]
    points: int = 0

    @property
    def degenerate(self) -> bool:
        return self.value == NEG_INF


@dataclass(frozen=True)
class LimitPointConfig:
    """A truncated realisation of the limiting point configuration."""

    gamma: float
    floor: float
    points: np.ndarray
    pair_key: int

    def pair_weight(self, s: int, t: int) -> float:
        """The Gumbel weight of pair ``(s, t)``, a pure function of the key."""
        if s > t:
            s, t = t, s
        return float(_gumbel_from(nb_uniform(np.uint64(self.pair_key), s, t)))


def _xi_from_config(cfg: LimitPointConfig, level: float, thin_key: int) -> XiSample:
    # ``level`` is the cut on the points: inner pairs have both points >= level
    y = cfg.points
    n_in = int(np.searchsorted(-y, -level, side="right"))
    if y.size < 2:
        return XiSample(NEG_INF, level, cfg.floor, False, (-1, -1), int(y.size))
    iv, is_, it_, ov, os_, ot_ = pair_max(y, n_in, cfg.pair_key, thin_key)
    stable = bool(n_in >= 2 and ov == iv)
    return XiSample(float(ov), level, cfg.floor, stable, (int(os_), int(ot_)), int(y.size))


def limit_config(source: StreamLike, gamma: float, floor: float) -> LimitPointConfig:
    rng = as_sampler(source)
    pts = sample_ppp(rng, gamma, floor)
    return LimitPointConfig(gamma, floor, pts, rng.child_key(_PAIRS))


def sample_xi(source: StreamLike, gamma: float = 1.0, inner: float = 4.0,
              outer: float = 4.0) -> XiSample:
    """``Xi`` from points down to ``-(inner + outer)``; stability is checked
    against the maximum over points above ``-inner``.

    Fewer than two points gives a degenerate sample with value ``-inf``.
    """
    if not outer > 0:
        raise ValueError("outer depth must be positive")
    rng = as_sampler(source)
    if isinstance(rng, StubSampler):
        return _stub_xi(rng, gamma, -inner, -(inner + outer))
    cfg = limit_config(rng, gamma, -(inner + outer))
    return _xi_from_config(cfg, -inner, rng.child_key(_THIN))


def _stub_xi(rng: StubSampler, gamma: float, level: float, floor: float) -> XiSample:
    # every pair in turn, with pair Gumbels read from the stub in triu order
    y = sample_ppp(rng, gamma, floor)
    if y.size < 2:
        return XiSample(NEG_INF, level, floor, False, (-1, -1), int(y.size))
    iu = np.triu_indices(y.size, 1)
    v = y[iu[0]] + y[iu[1]] - np.asarray(rng.gumbel(len(iu[0])), dtype=float)
    k = int(np.argmax(v))
    inside = (y[iu[0]] >= level) & (y[iu[1]] >= level)
    stable = bool(inside.any() and np.max(v[inside]) == v[k])
    return XiSample(float(v[k]), level, floor, stable, (int(iu[0][k]), int(iu[1][k])), int(y.size))


def sample_xi_config(cfg: LimitPointConfig, inner: float, thin_key: int = 0) -> XiSample:
    """``Xi`` for a given configuration (used with hand-built points)."""
    return _xi_from_config(cfg, -inner, thin_key)


def sample_xi_many(stream: RandomStream, size: int, gamma: float = 1.0, inner: float = 4.0,
                   outer: float = 4.0) -> list[XiSample]:
    """Replicate ``r`` uses ``stream.derive(r)``."""
    return [sample_xi(stream.derive(r), gamma, inner, outer) for r in range(size)]


def sample_xi_alpha(source: StreamLike, alpha: float) -> float:
    """Max of ``Lambda_s + Lambda_t - Lambda_st - 2 alpha`` over ``N ~ Poisson(e^alpha)``
    points; ``-inf`` when ``N < 2``."""
    rng = as_sampler(source)
    count = int(rng.poisson(math.exp(alpha)))
    if count < 2:
        return NEG_INF
    y = np.sort(np.asarray(rng.gumbel(count), dtype=float))[::-1] - alpha
    if isinstance(rng, StubSampler):
        lam = np.asarray(rng.gumbel(count * (count - 1) // 2), dtype=float)
        iu = np.triu_indices(count, 1)
        return float(np.max(y[iu[0]] + y[iu[1]] - lam))
    *_, z, _, _ = pair_max(y, 0, rng.child_key(_PAIRS), rng.child_key(_THIN))
    return float(z)


# -- the Q representation -----------------------------------------------------

def q_truncation_bound(partial: np.ndarray, q: float) -> float:
    """Expected number of pairs involving points beyond ``partial`` that beat ``q``.

    Given ``S_1..S_T``, a later point sits at ``S_T`` plus a Gamma variable,
    so ``sum_{t>T} E exp(-c S_t) = exp(-c S_T) / c`` with ``c = S_s / q``;
    pairs of two later points contribute at most ``exp(-S_T^2/q) (q/S_T)^2``.
    """
    if not math.isfinite(q):
        return math.inf
    S = np.asarray(partial, dtype=np.float64)
    last = S[-1]
    bound = float(np.sum(np.exp(-S * last / q) * q / S))
    bound += math.exp(-last * last / q) * (q / last) ** 2
    return bound


# keyed uniforms are at least 2^-53, so a unit exponential never exceeds this
_E_MAX = 53.0 * math.log(2.0)


@nb.njit(cache=True)
def _tail_sum(S, T, last, scale, eps):
    # sum_s exp(-S_s last / scale) scale / S_s; terms decrease in s
    b = math.exp(-last * last / scale) * (scale / last) ** 2
    for s in range(T):
        term = math.exp(-S[s] * last / scale) * scale / S[s]
        b += term
        if term < eps:
            # the remaining terms are smaller still, and geometrically so
            b += term * (T - s)
            break
    return b


@nb.njit(cache=True)
def _q_kernel(point_key, pair_key, delta, cap):
    S = np.empty(cap)
    acc = 0.0
    q = np.inf
    T = 0
    while T < cap:
        acc += -math.log(nb_uniform(point_key, T, 0))
        S[T] = acc
        for s in range(T):
            if S[s] * acc > _E_MAX * q:
                break  # no pair weight can bring this pair (or later ones) below q
            e = -math.log(nb_uniform(pair_key, s, T))
            v = S[s] * acc / e
            if v < q:
                q = v
        T += 1
        if T >= 2 and _tail_sum(S, T, acc, q, delta * 1e-6) < delta:
            break
    return q, T


def _q_reference(rng, delta: float, cap: int) -> tuple[float, int]:
    """Plain-Python version of the truncated Q computation, for stubs."""
    S: list[float] = []
    q = math.inf
    try:
        while len(S) < cap:
            S.append((S[-1] if S else 0.0) + float(rng.exponential(1.0)))
            for s in range(len(S) - 1):
                q = min(q, S[s] * S[-1] / float(rng.exponential(1.0)))
            if len(S) >= 2 and q_truncation_bound(np.array(S), q) < delta:
                break
    except StubExhausted:
        pass
    return q, len(S)


def sample_q(source: StreamLike, delta: float = 1e-6, cap: int = 100_000) -> float:
    """``Q = min_{s<t} S_s S_t / E_st``, extended until the expected number of
    unexamined pairs below the current minimum drops under ``delta``.

    Partial sums and pair exponentials are keyed by index, so two calls on
    the same stream with different ``delta`` share every examined value.
    A stub sampler is read sequentially and its exhaustion ends the sequence.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    rng = as_sampler(source)
    if isinstance(rng, StubSampler):
        return _q_reference(rng, delta, cap)[0]
    q, _ = _q_kernel(np.uint64(rng.child_key(_POINTS)), np.uint64(rng.child_key(_PAIRS)),
                     delta, cap)
    return float(q)


def sample_q_many(stream: RandomStream, size: int, delta: float = 1e-6) -> np.ndarray:
    return np.array([sample_q(stream.derive(r), delta) for r in range(size)])


@dataclass(frozen=True)
class TailEstimate:
    x: float
    estimate: float
    std_error: float
    method: str

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.estimate - z * self.std_error, self.estimate + z * self.std_error


@nb.njit(cache=True)
def _tail_product_kernel(point_key, x, cap, tol):
    S = np.empty(cap)
    acc = 0.0
    logp = 0.0
    T = 0
    while T < cap:
        acc += -math.log(nb_uniform(point_key, T, 0))
        S[T] = acc
        for s in range(T):
            c = S[s] * acc / x
            if c > 40.0:
                break  # factors within 1e-17 of one; S is increasing
            logp += math.log1p(-math.exp(-c))
        T += 1
        if T >= 2 and _tail_sum(S, T, acc, x, tol * 1e-6) < tol:
            break
    return math.exp(logp), T


def tail_q_product(stream: RandomStream, x: float, pair_cap: int = 100_000,
                   replicates: int = 10_000) -> TailEstimate:
    """Monte Carlo mean of ``prod_{s<t} (1 - exp(-S_s S_t / x))``.

    Each product stops once the expected omitted factor mass is below 1e-8
    or ``pair_cap`` points are in.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    vals = np.empty(replicates)
    for r in range(replicates):
        key = np.uint64(stream.derive(r).derive(_POINTS).key)
        vals[r], _ = _tail_product_kernel(key, float(x), pair_cap, 1e-8)
    se = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return TailEstimate(float(x), float(vals.mean()), se, "product-formula")


def tail_q_direct(q_samples: np.ndarray, x: float) -> TailEstimate:
    q = np.asarray(q_samples, dtype=float)
    p = float(np.mean(q > x))
    return TailEstimate(float(x), p, math.sqrt(max(p * (1 - p), 0.0) / q.size), "direct")


def _log_integrand(v, u, x):
    return math.log1p(-math.exp(-(u + 1.0) * (v + 1.0) / x))


def tail_q_log_integral(x: float) -> float:
    """``int_0^inf int_0^inf log(1 - exp(-(u+1)(v+1)/x)) du dv`` by 2-D quadrature."""
    if not x > 0:
        raise ValueError("x must be positive")
    # beyond this radius the integrand is below 1e-300 in magnitude
    edge = max(1.0, 800.0 * x)
    val, _ = integrate.dblquad(_log_integrand, 0.0, edge, 0.0, lambda u: max(0.0, edge / (u + 1.0) - 1.0),
                               args=(x,), epsabs=1e-9, epsrel=1e-9)
    return val


def tail_q_log_integral_1d(x: float) -> float:
    """The same double integral reduced to ``-x int_{1/x}^inf Li2(e^-y) / y dy``."""
    f = lambda y: special.spence(-math.expm1(-y)) / y  # spence(1 - w) = Li2(w)
    val, _ = integrate.quad(f, 1.0 / x, np.inf, epsabs=1e-12, epsrel=1e-11, limit=400)
    return -x * val


def tail_q_lower_bound(x: float) -> TailEstimate:
    """Deterministic lower bound ``e^-1 exp(double integral)`` on ``P(Q > x)``."""
    val = math.exp(-1.0 + tail_q_log_integral(x))
    return TailEstimate(float(x), val, 0.0, "lower-bound")


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    variance: float
    mean_ci: tuple[float, float]
    variance_ci: tuple[float, float]
    used: int
    unstable: int


class TooUnstable(RuntimeError):
    pass


def estimate_xi_moments(stream: RandomStream, replicates: int, inner: float = 4.0,
                        outer: float = 4.0, gamma: float = 1.0, resamples: int = 1000,
                        level: float = 0.95) -> MomentEstimate:
    """Mean and variance of ``Xi`` from stable samples, with bootstrap intervals.

    Samples come from ``stream.derive(0)``, the bootstrap from ``stream.derive(1)``.
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    samples = sample_xi_many(stream.derive(0), replicates, gamma, inner, outer)
    return moments_from_samples(samples, stream.derive(1), resamples, level)


def moments_from_samples(samples: list[XiSample], boot: RandomStream, resamples: int = 1000,
                         level: float = 0.95) -> MomentEstimate:
    """The moment estimate for already drawn samples; unstable ones are dropped
    and more than 5% of them is an error."""
    good = np.array([s.value for s in samples if s.stable])
    unstable = len(samples) - good.size
    if unstable > 0.05 * len(samples) or good.size < 2:
        raise TooUnstable(f"{unstable} of {len(samples)} samples unstable")
    mean_ci = bootstrap_ci(good, np.mean, level, resamples, boot.derive(0))
    var_ci = bootstrap_ci(good, lambda a: np.var(a, ddof=1), level, resamples, boot.derive(1))
    return MomentEstimate(float(good.mean()), float(good.var(ddof=1)), mean_ci, var_ci,
                          int(good.size), int(unstable))
