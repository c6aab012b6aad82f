import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from aztec.squish import decompose
from aztec.verify import (
    _config_probs, _samples, boltzmann_chi2, box_whites_L2, center_a_edge, clopper_pearson,
    coupling_location, coupling_tv, loglog_slope, loop_symmetry, peierls_double_edges,
    peierls_loops, polygon_counts, pool_cells, smooth_independence,
)
from aztec.kernels import KernelCache, smooth_Kinv
from aztec.lattice import face_kind


def test_polygon_counts_match_oracle():
    # frozen from the oracle walk: {4: 2, 6: 6, 8: 28, 10: 140}
    assert polygon_counts(10) == oracles.polygon_counts(10) == {4: 2, 6: 6, 8: 28, 10: 140}


def test_polygon_counts_below_entropy_bound():
    for d, c in polygon_counts(12).items():
        assert c <= 3**d


@given(k=st.integers(0, 200), extra=st.integers(0, 200))
def test_clopper_pearson_upper_matches_oracle(k, extra):
    n = k + extra
    if n == 0:
        return
    lo, hi = clopper_pearson(k, n)
    assert hi == pytest.approx(oracles.clopper_pearson_upper(k, n), abs=1e-12)
    assert 0 <= lo <= k / n <= hi <= 1


def test_clopper_pearson_zero_successes():
    # with no successes the one-sided bound is 1 - (1 - conf)^(1/n)
    assert clopper_pearson(0, 10_000)[1] == pytest.approx(1 - 0.01 ** (1 / 10_000), rel=1e-9)


def test_center_edge_is_a_edge():
    for n in (8, 64, 128):
        (wx, wy), (bx, by) = center_a_edge(n)
        assert wx % 2 == 1 and wy % 2 == 0
        assert abs(bx - wx) == 1 and abs(by - wy) == 1
        assert face_kind(wx, by) == "a"


def test_boltzmann_small():
    out = boltzmann_chi2(0.5, 3000, seed=11)
    assert out["states"] == 1024
    assert out["p_value"] > 1e-3


@given(exp=st.lists(st.floats(0.01, 50), min_size=1, max_size=60), data=st.data())
def test_pool_cells_preserves_totals(exp, data):
    obs = data.draw(st.lists(st.integers(0, 60), min_size=len(exp), max_size=len(exp)))
    o, e = pool_cells(obs, exp, 5.0)
    assert o.sum() == pytest.approx(sum(obs)) and e.sum() == pytest.approx(sum(exp))
    if sum(exp) >= 5:
        assert e.min() >= 5 - 1e-9


def test_boltzmann_sparse_cells():
    # 1024 states and 3000 samples: most cells are pooled but the test still has bins
    out = boltzmann_chi2(0.9, 3000)
    assert out["bins"] > 100 and np.isfinite(out["p_value"])


def test_peierls_rejects_large_a():
    with pytest.raises(ValueError):
        peierls_loops(0.4, [4], 10)


def test_peierls_reports():
    reps = peierls_loops(0.2, [4, 8], 100, n=32)
    assert [r.params["d"] for r in reps] == [4, 8]
    for r in reps:
        assert 0 <= r.value <= r.upper <= 1
        assert r.passed == (r.upper <= r.bound)
    reps = peierls_double_edges(0.9, [6], 100, n=32)
    assert reps[0].bound == pytest.approx(2 * 0.9**6 / 0.1)


def test_double_edge_chain_lengths_even():
    from aztec.verify import _double_chain_at, _edge_index

    S = [_edge_index(center_a_edge(32))]
    for cov in _samples(32, 0.7, 0, 30):
        assert _double_chain_at(decompose(cov), S) % 2 == 0


def test_coupling_location_is_a_face():
    for m in (4, 8, 16):
        assert face_kind(*coupling_location(m, 0.4)) == "a"


def test_smooth_config_law_normalized():
    cache = KernelCache(0.5)
    whites = box_whites_L2((1, 1))
    p, configs = _config_probs(whites, lambda w, b: smooth_Kinv(w, b, 0.5, cache), 0.5)
    assert len(p) == 4**6 == len(configs)
    assert p.sum() == pytest.approx(1, abs=1e-10)
    assert p.min() > -1e-10


def test_coupling_small():
    out = coupling_tv(4, 0.4)
    assert abs(out["sum_az"] - 1) < 1e-8 and abs(out["sum_sm"] - 1) < 1e-8
    assert out["kinv_identity_error"] < 1e-8
    assert 0 < out["tv"] < 1


def test_coupling_rejects():
    with pytest.raises(ValueError):
        coupling_tv(4, 0.4, L=3)
    with pytest.raises(ValueError):
        coupling_tv(32, 0.4)


def test_loglog_slope_exact():
    xs = np.array([4.0, 8.0, 16.0])
    assert loglog_slope(xs, 3 * xs**-0.5) == pytest.approx(-0.5)


def test_independence_decreases():
    d = [smooth_independence(s, 0.5) for s in (8, 16)]
    assert d[1] < d[0]


def test_independence_rejects_odd():
    with pytest.raises(ValueError):
        smooth_independence(7, 0.5)


def test_loop_symmetry_runs():
    out = loop_symmetry(2, 0.5, 100, seed=4)
    assert out["samples"] == 100
    assert out["within_3se"]
