import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mfdiam.core_random import (EdgeWeightOracle, RandomStream, StubExhausted, StubSampler,
                                TableOracle, derive_stream, edge_weight, materialize,
                                sample_exponential, sample_gumbel, sample_ppp)
from mfdiam.stats_kit import exponential_cdf, ks_against_cdf, ks_null_quantile, ks_two_sample

ROOT = RandomStream(12345)


# -- streams -----------------------------------------------------------------

def test_derive_same_label_identical():
    a, b = derive_stream(ROOT, 5), derive_stream(ROOT, 5)
    assert a == b
    assert np.array_equal(sample_exponential(a, 1.0, 50), sample_exponential(b, 1.0, 50))


def test_sibling_streams_pass_ks():
    x = sample_exponential(ROOT.derive(0), 1.0, 10_000)
    y = sample_exponential(ROOT.derive(1), 1.0, 10_000)
    assert ks_two_sample(x, y) <= ks_null_quantile(10_000, 10_000, 0.01)


def test_path_order_matters():
    a = ROOT.derive(1).derive(2)
    b = ROOT.derive(2).derive(1)
    assert a != b and a.key != b.key
    assert not np.array_equal(sample_gumbel(a, 10), sample_gumbel(b, 10))


@given(st.integers(0, 2 ** 64 - 1), st.lists(st.integers(0, 2 ** 64 - 1), max_size=4))
@settings(max_examples=50, deadline=None)
def test_stream_determinism(seed, path):
    s = RandomStream(seed, tuple(path))
    assert np.array_equal(s.sampler().uniform(8), RandomStream(seed, tuple(path)).sampler().uniform(8))


def test_stream_rejects_oversized_seed():
    with pytest.raises(ValueError):
        RandomStream(2 ** 64)


def test_uniform_open_interval():
    u = ROOT.derive(3).sampler().uniform(10 ** 6)
    assert u.min() > 0 and u.max() < 1


def test_sampler_child_keys_fresh():
    s = ROOT.sampler()
    assert s.child_key(1) != s.child_key(1)


# -- elementary samplers -------------------------------------------------------

def test_exponential_mean():
    x = sample_exponential(ROOT.derive(10), 2.0, 10 ** 5)
    assert abs(x.mean() - 2.0) <= 0.05


def test_exponential_positive():
    assert np.all(sample_exponential(ROOT.derive(11), 1.0, 10 ** 6) > 0)


def test_exponential_tail():
    x = sample_exponential(ROOT.derive(12), 1.0, 10 ** 5)
    assert abs(np.mean(x > 1.0) - math.exp(-1)) <= 0.01


@pytest.mark.parametrize("mean", [0.0, -1.0])
def test_exponential_rejects_nonpositive_mean(mean):
    with pytest.raises(ValueError):
        sample_exponential(ROOT, mean)


def test_gumbel_cdf_at_zero():
    g = sample_gumbel(ROOT.derive(13), 10 ** 5)
    assert abs(np.mean(g <= 0) - math.exp(-1)) <= 0.01


def test_gumbel_mean_is_euler_constant():
    g = sample_gumbel(ROOT.derive(14), 10 ** 5)
    assert abs(g.mean() - np.euler_gamma) <= 0.02


def test_gumbel_is_minus_log_exponential():
    # both transform the same uniforms, so on a shared stream they agree pathwise
    g = sample_gumbel(ROOT.derive(15), 10 ** 4)
    e = -np.log(sample_exponential(ROOT.derive(15), 1.0, 10 ** 4))
    assert np.allclose(g, e, rtol=0, atol=1e-12)
    assert ks_two_sample(g, e) <= 0.02
    # and on independent streams the two laws stay within the null band
    e2 = -np.log(sample_exponential(ROOT.derive(16), 1.0, 10 ** 4))
    assert ks_two_sample(g, e2) <= ks_null_quantile(10 ** 4, 10 ** 4, 0.01)


def test_stub_values_verbatim_and_exhaustion():
    s = StubSampler(exponentials=[3.0], gumbels=[0.25, 0.5])
    assert sample_exponential(s, 7.0) == 3.0
    assert list(sample_gumbel(s, 5)) == [0.25, 0.5]
    with pytest.raises(StubExhausted):
        sample_gumbel(s)


# -- edge weights ---------------------------------------------------------------

def test_edge_weight_symmetric():
    o = EdgeWeightOracle(10, ROOT)
    assert edge_weight(o, 3, 7) == edge_weight(o, 7, 3)


@given(st.integers(2, 500), st.data())
@settings(max_examples=50, deadline=None)
def test_edge_weight_symmetric_positive_and_replayable(n, data):
    o = EdgeWeightOracle(n, RandomStream(n))
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, n - 1).filter(lambda v: v != i))
    w = o.weight(i, j)
    assert w > 0 and w == o.weight(j, i) == EdgeWeightOracle(n, RandomStream(n)).weight(i, j)


def test_edge_weight_depends_on_seed():
    assert EdgeWeightOracle(5, RandomStream(1)).weight(0, 1) != EdgeWeightOracle(5, RandomStream(2)).weight(0, 1)


def test_edge_weight_errors():
    o = EdgeWeightOracle(4, ROOT)
    with pytest.raises(ValueError):
        o.weight(2, 2)
    with pytest.raises(IndexError):
        o.weight(0, 4)
    with pytest.raises(ValueError):
        EdgeWeightOracle(1, ROOT)


def test_edge_weights_exponential_mean_n():
    n = 200
    m = EdgeWeightOracle(n, ROOT.derive(20)).matrix()
    w = m[np.triu_indices(n, 1)]
    assert w.size == 19900
    assert ks_against_cdf(w, exponential_cdf(n)) <= 0.02


def test_matrix_matches_pointwise_and_rows():
    o = EdgeWeightOracle(30, ROOT.derive(21))
    m = o.matrix()
    assert np.all(np.isinf(np.diag(m)))
    assert m[4, 17] == o.weight(4, 17) == m[17, 4]
    assert np.array_equal(o.row(9), m[9])


def test_table_oracle_validation_and_relabel():
    with pytest.raises(ValueError):
        TableOracle(np.array([[0.0, 1.0], [2.0, 0.0]]))
    t = TableOracle.from_edges(3, {(0, 1): 1.0, (0, 2): 5.0, (1, 2): 3.0})
    r = t.relabel(np.array([2, 0, 1]))
    # new vertex k is old vertex perm[k]
    assert r.weight(1, 2) == t.weight(0, 1)
    assert r.weight(0, 1) == t.weight(2, 0)
    assert materialize(t) is t


# -- Poisson point process ------------------------------------------------------

def test_ppp_stub_example():
    s = StubSampler(exponentials=[0.5, 1.0, 2.0])
    y = sample_ppp(s, 1.0, -1.0)
    assert np.allclose(y, [math.log(2), -math.log(1.5)])
    assert round(y[0], 4) == 0.6931 and round(y[1], 4) == -0.4055


def test_ppp_max_is_gumbel():
    rng = ROOT.derive(30).sampler()
    empty = sum(sample_ppp(rng, 1.0, 0.0).size == 0 for _ in range(10 ** 5))
    assert abs(empty / 1e5 - math.exp(-1)) <= 0.01


def test_ppp_mean_count():
    rng = ROOT.derive(31).sampler()
    counts = [sample_ppp(rng, 1.0, -1.0).size for _ in range(10 ** 5)]
    assert abs(np.mean(counts) - math.e) <= 0.05


@pytest.mark.parametrize("gamma,A", [(1.0, 0.0), (1.0, 1.0), (2.0, 1.0)])
def test_ppp_count_law_chi_square(gamma, A):
    rng = ROOT.derive(32).derive(int(10 * gamma + A)).sampler()
    counts = np.array([sample_ppp(rng, gamma, -A).size for _ in range(10 ** 5)])
    mu = gamma * math.exp(A)
    top = int(stats.poisson.ppf(0.999, mu))
    obs = np.array([np.sum(counts == k) for k in range(top)] + [np.sum(counts >= top)])
    exp = np.array([stats.poisson.pmf(k, mu) for k in range(top)] + [stats.poisson.sf(top - 1, mu)])
    assert stats.chisquare(obs, exp * counts.size).pvalue > 0.01


def test_ppp_descending_and_above_floor():
    y = sample_ppp(ROOT.derive(33), 3.0, -2.0)
    assert np.all(np.diff(y) < 0) and np.all(y >= -2.0)


def test_ppp_rejects_bad_gamma():
    with pytest.raises(ValueError):
        sample_ppp(ROOT, 0.0, 0.0)
