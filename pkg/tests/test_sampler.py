import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from aztec.lattice import aztec_graph, enumerate_coverings, exact_inverse_kasteleyn, local_statistics
from aztec.sampler import (
    SamplerConfig, creation_probabilities, edge_marginal_check, make_rng, sample, sample_many,
    sample_order,
)


def chi2_against_enumeration(a, count, seed):
    cov = enumerate_coverings(aztec_graph(4, a))
    index = {c.key(): i for i, (c, _) in enumerate(cov)}
    w = np.array([x for _, x in cov])
    hits = np.zeros(len(cov))
    for c in sample_many(SamplerConfig(1, a, seed), count):
        hits[index[c.key()]] += 1
    exp = count * w / w.sum()
    # pool bins with small expectation so the chi-squared approximation holds
    order = np.argsort(exp)
    obs_p, exp_p, acc_o, acc_e = [], [], 0.0, 0.0
    for i in order:
        acc_o += hits[i]
        acc_e += exp[i]
        if acc_e >= 5:
            obs_p.append(acc_o)
            exp_p.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e:
        obs_p[-1] += acc_o
        exp_p[-1] += acc_e
    return stats.chisquare(obs_p, exp_p).pvalue


def test_same_seed_same_covering():
    cfg = SamplerConfig(3, 0.5, seed=42)
    a, b = sample(cfg, 7), sample(cfg, 7)
    assert np.array_equal(a.dirs, b.dirs)
    assert not np.array_equal(sample(cfg, 8).dirs, a.dirs)


@given(st.integers(1, 6), st.floats(0.05, 0.95), st.integers(0, 2**63))
def test_samples_are_perfect_matchings(m, a, seed):
    c = sample(SamplerConfig(m, a, seed))
    assert c.n == 4 * m and c.is_perfect_matching()


def test_odd_orders():
    for n in (1, 2, 3, 5, 7):
        assert sample_order(n, 0.3, seed=n).is_perfect_matching()


def test_boltzmann_chi2_small():
    assert chi2_against_enumeration(0.5, 20000, seed=3) > 1e-3


def test_enumerate_method_agrees():
    cfg = SamplerConfig(1, 0.5, seed=1, method="enumerate")
    c = sample(cfg, 0)
    assert c.is_perfect_matching()
    with pytest.raises(ValueError):
        sample(SamplerConfig(2, 0.5, method="enumerate"))


@pytest.mark.parametrize("bad", [dict(m=0, a=0.5), dict(m=1, a=1.0), dict(m=1, a=0.5, seed=-1),
                                 dict(m=1, a=0.5, method="glauber")])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SamplerConfig(**bad).validate()


def test_creation_probabilities_in_unit_interval():
    for p in creation_probabilities(16, 0.2)[1:]:
        assert np.all((p >= 0) & (p <= 1))


def test_central_edge_marginal():
    # the a-edge at the centre of the order-4 diamond
    edge = ((4, 5), (5, 4))
    freq, exact, z = edge_marginal_check(SamplerConfig(1, 0.5, seed=11), edge, 100000)
    g = aztec_graph(4, 0.5)
    assert exact == pytest.approx(local_statistics(g, exact_inverse_kasteleyn(g), [edge]))
    assert 0 <= exact <= 1 and abs(z) < 4


def test_frozen_corner_edge():
    # no edge is exactly forced at finite n; the corner edge misses by 2.56e-6
    g = aztec_graph(16, 0.5)
    edge = ((0, 1), (1, 0))
    exact = local_statistics(g, exact_inverse_kasteleyn(g), [edge])
    assert 1 - 1e-5 < exact < 1
    freq, _, _ = edge_marginal_check(SamplerConfig(4, 0.5, seed=5), edge, 2000)
    # P(more than 3 misses) < 1e-5 under the exact law
    assert freq >= 1 - 3 / 2000


def test_streams_are_independent_of_thread_count():
    a = make_rng(9, 3).random(4)
    b = make_rng(9, 3).random(4)
    assert np.array_equal(a, b)
