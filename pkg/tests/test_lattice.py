import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from aztec.lattice import (
    DIRS, Covering, aztec_graph, build_diamond, enumerate_coverings, exact_inverse_kasteleyn,
    face_kind, inverse_residual, kasteleyn_entry, kasteleyn_matrix, local_statistics,
    partition_function_transfer,
)

# frozen from oracles.all_matchings
Z_N4_HALF = 2.44140625


def test_build_diamond_counts():
    g = build_diamond(1, 0.5)
    assert g.n == 4 and len(g.whites) == 20 and len(g.blacks) == 20
    assert {int(x) for x, _ in g.whites} == {1, 3, 5, 7}
    assert {int(y) for _, y in g.whites} == {0, 2, 4, 6, 8}
    assert face_kind(1, 1) == "a"
    assert build_diamond(75, 0.5).n == 300


@pytest.mark.parametrize("m,a", [(0, 0.5), (-1, 0.5), (1, 0.0), (1, 1.0), (1.5, 0.5)])
def test_build_diamond_rejects(m, a):
    with pytest.raises(ValueError):
        build_diamond(m, a)


def test_order_two_uniform():
    g = aztec_graph(2, 1.0)
    assert abs(np.linalg.det(kasteleyn_matrix(g))) == pytest.approx(8.0, rel=1e-12)
    assert len(enumerate_coverings(g)) == 8


def test_enumeration_count_and_oracle():
    g = aztec_graph(4, 0.5)
    cov = enumerate_coverings(g)
    assert len(cov) == 1024 == 2 ** (4 * 5 // 2)
    ref = oracles.all_matchings(4, 0.5)
    assert sum(w for _, w in ref) == pytest.approx(Z_N4_HALF, rel=1e-14)
    ours = sorted(round(w, 12) for _, w in cov)
    assert ours == sorted(round(w, 12) for _, w in ref)
    keys = {c.key() for c, _ in cov}
    assert len(keys) == 1024
    assert all(c.is_perfect_matching() for c, _ in cov)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("a", [0.2, 0.5, 0.9])
def test_det_equals_partition_function(n, a):
    g = aztec_graph(n, a)
    det = abs(np.linalg.det(kasteleyn_matrix(g)))
    Z = partition_function_transfer(g)
    assert det == pytest.approx(Z, rel=1e-9)
    if n <= 4:
        assert sum(w for _, w in enumerate_coverings(g)) == pytest.approx(Z, rel=1e-9)


@given(st.integers(1, 8), st.floats(0.05, 0.95))
def test_faces_have_negative_product(n, a):
    # product of the four K entries around each interior even-even... odd-odd face is negative
    for cx in range(1, 2 * n, 2):
        for cy in range(1, 2 * n, 2):
            ws = [(cx, cy - 1), (cx, cy + 1)]
            bs = [(cx - 1, cy), (cx + 1, cy)]
            if not all(0 <= w[1] <= 2 * n for w in ws):
                continue
            prod = 1
            for w in ws:
                for b in bs:
                    prod *= kasteleyn_entry(b, w, a)
            assert prod.real < 0 and abs(prod.imag) < 1e-12


def test_inverse_residual():
    g = build_diamond(1, 0.5)
    Ki = exact_inverse_kasteleyn(g)
    assert np.abs(kasteleyn_matrix(g) @ Ki - np.eye(20)).max() < 1e-9


@pytest.mark.slow
def test_inverse_order_64():
    # entries between opposite frozen corners are huge, so only the scaled residual is meaningful here
    g = build_diamond(16, 0.5)
    Ki = exact_inverse_kasteleyn(g)
    assert inverse_residual(kasteleyn_matrix(g), Ki) < 1e-8


@pytest.mark.parametrize("m", [1, 2])
def test_edge_probabilities_sum_to_one(m):
    g = build_diamond(m, 0.5)
    Ki = exact_inverse_kasteleyn(g)
    tot = np.zeros(len(g.whites))
    for wi, bi, _ in g.edges:
        w, b = tuple(map(int, g.whites[wi])), tuple(map(int, g.blacks[bi]))
        p = (kasteleyn_entry(b, w, g.a) * Ki[wi, bi]).real
        assert -1e-8 < p < 1 + 1e-8
        tot[wi] += p
    assert np.abs(tot - 1).max() < 1e-8


def test_single_edge_probabilities_match_enumeration():
    g = aztec_graph(4, 0.5)
    Ki = exact_inverse_kasteleyn(g)
    ref = oracles.all_matchings(4, 0.5)
    for (wi, bi, _) in g.edges:
        w, b = tuple(map(int, g.whites[wi])), tuple(map(int, g.blacks[bi]))
        p = local_statistics(g, Ki, [(b, w)])
        assert p == pytest.approx(oracles.edge_probability(ref, [(w, b)]), abs=1e-9)


@given(st.data())
def test_edge_sets_match_enumeration(data):
    g = aztec_graph(4, 0.5)
    Ki = _KI
    idx = data.draw(st.lists(st.integers(0, len(g.edges) - 1), min_size=1, max_size=4, unique=True))
    edges = []
    for i in idx:
        wi, bi, _ = g.edges[i]
        edges.append((tuple(map(int, g.blacks[bi])), tuple(map(int, g.whites[wi]))))
    exact = oracles.edge_probability(_REF, [(w, b) for b, w in edges])
    assert local_statistics(g, Ki, edges) == pytest.approx(exact, abs=1e-9)


_REF = oracles.all_matchings(4, 0.5)
_KI = exact_inverse_kasteleyn(aztec_graph(4, 0.5))


def test_local_statistics_edge_cases():
    g = aztec_graph(4, 0.5)
    assert local_statistics(g, _KI, []) == 1.0
    w = (3, 2)
    e1 = ((4, 3), w)
    e2 = ((2, 3), w)
    assert local_statistics(g, _KI, [e1, e2]) == 0.0
    with pytest.raises(ValueError):
        local_statistics(g, _KI, [e1, e1])
    with pytest.raises(ValueError):
        local_statistics(g, _KI, [((6, 3), w)])


@given(st.integers(1, 12), st.integers(0, 2**32))
def test_classification_is_a_partition(n, seed):
    g = aztec_graph(n, 0.5)
    rng = np.random.default_rng(seed)
    x, y = rng.integers(0, 2 * n + 1, 2)
    if (x + y) % 2 == 0:
        kind = face_kind(int(x), int(y))
        assert kind in ("a", "b", "plain")
        assert (kind == "plain") == (x % 2 == 0)
    whites = {tuple(v) for v in g.whites.tolist()}
    blacks = {tuple(v) for v in g.blacks.tolist()}
    assert not whites & blacks
    assert len(whites) == len(blacks) == n * (n + 1)


def test_weights_by_face_agree_with_kasteleyn():
    g = aztec_graph(8, 0.3)
    for wi, bi, _ in g.edges:
        w, b = tuple(g.whites[wi]), tuple(g.blacks[bi])
        assert g.edge_weight(w, b) == pytest.approx(g.edge_weight_by_face(w, b))
        assert g.edge_weight(w, b) == oracles.edge_weight(w, b, 0.3)


def test_covering_dimers_roundtrip():
    c = enumerate_coverings(aztec_graph(2, 0.5))[3][0]
    d = c.dimers()
    assert len({b for b, _ in d}) == len(d) == 6
    for b, w in d:
        assert tuple(np.subtract(b, w)) in {tuple(v) for v in DIRS.tolist()}
    assert isinstance(c, Covering)
