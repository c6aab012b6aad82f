import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from aztec.kernels import (
    AiryQuery, KA_asymptotic, KA_numeric, KernelCache, airy, airy_fredholm, airy_moments,
    airy_phi, airy_stationary, airy_tilde, ctilde, decay_slope, derived_constants, E_kl,
    effective_alpha, extended_airy, fredholm_det, scaled_vertex, smooth_edge_probability,
    smooth_Kinv, smooth_Kinv_direct,
)

# frozen from tests/oracles.py
E00_HALF = 0.5080996800485289
E11_HALF = -0.13512460006066132
C_HALF = 0.6180339887498949
F2_MINUS_2 = 0.4132241425051  # gap probability of [-2, inf), mpmath Nystrom
AIRY_MEAN_UNIT = 0.19060509813659837  # integral of the density over [-1, 1]

CACHE = KernelCache(0.5)


def test_derived_constants():
    K = derived_constants(0.5)
    assert K.c == pytest.approx(0.4, abs=1e-15)
    assert K.C == pytest.approx(C_HALF, abs=1e-14)
    assert K.g[(0, 0)] == pytest.approx(1j * (math.sqrt(1.25) + 0.5) / 0.5, abs=1e-14)
    assert abs(K.g[(0, 0)]) == pytest.approx(3.23607, abs=1e-5)
    ref = oracles.constants_mp(0.5)
    for name in ("xi", "c0", "lam1", "lam2"):
        assert getattr(K, name) == pytest.approx(float(ref[name]), rel=1e-13)
    assert K.h(0, 1) == K.h(1, 0) == 1 and K.h(0, 0) == K.h(1, 1) == 0


@given(st.floats(0.01, 0.99))
def test_constant_ranges(a):
    K = derived_constants(a)
    assert 0 < K.c < 0.5 and 0 < K.C < 1 and K.xi < 0


@pytest.mark.parametrize("a", [0.0, 1.0, -0.3])
def test_constants_domain(a):
    with pytest.raises(ValueError):
        derived_constants(a)


def test_ctilde_values():
    assert ctilde(1, 1, 0.5) == pytest.approx(4.5)
    assert ctilde(1j, 1j, 0.5) == pytest.approx(2.5)
    with pytest.raises(ZeroDivisionError):
        ctilde(0, 1, 0.5)


@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10), st.complex_numbers(min_magnitude=0.1, max_magnitude=10),
       st.floats(0.05, 0.95))
def test_ctilde_symmetry(u1, u2, a):
    v = ctilde(u1, u2, a)
    assert ctilde(1 / u1, u2, a) == pytest.approx(v, rel=1e-9, abs=1e-9)
    assert ctilde(u2, u1, a) == pytest.approx(v, rel=1e-9, abs=1e-9)


def test_E00_against_oracle():
    assert E_kl(0, 0, 0.5, CACHE) == pytest.approx(E00_HALF, abs=1e-12)
    assert E_kl(1, 1, 0.5, CACHE) == pytest.approx(E11_HALF, abs=1e-12)
    assert oracles.E_torus(0, 0, 0.5) == pytest.approx(E00_HALF, abs=1e-13)


@pytest.mark.parametrize("a", [0.2, 0.5])
def test_E_grid_against_torus(a):
    cache = KernelCache(a)
    for k in range(-2, 3):
        for l in range(-2, 3):
            assert cache.E(k, l) == pytest.approx(oracles.E_torus(k, l, a), abs=1e-9)


@given(st.integers(-12, 12), st.integers(-12, 12))
def test_E_symmetry(k, l):
    v = CACHE.E(k, l)
    assert CACHE.E(l, k) == v
    assert CACHE.E(-k, -l) == v


def test_decay_toward_constant():
    slopes, _ = decay_slope(0.5, range(20, 31), diagonal=True, cache=CACHE)
    # E_{b,b} carries the decay constant to within a slowly vanishing correction
    assert abs(slopes[-1] / math.log(C_HALF) - 1) < 0.05


WHITES = [(1, 0), (1, 2), (3, 0), (3, 2)]  # the four parity classes


@pytest.mark.parametrize("x", WHITES)
def test_smooth_kinv_direct_grid(x):
    for dx in (-3, -1, 1, 3, 5):
        for dy in (-5, -3, -1, 1, 3):
            y = (x[0] + dx, x[1] + dy)
            assert smooth_Kinv(x, y, 0.5, CACHE) == pytest.approx(
                smooth_Kinv_direct(x, y, 0.5, N=256), abs=1e-9)


@given(st.integers(-20, 20), st.integers(-20, 20))
def test_smooth_kinv_translation(tx, ty):
    x, y = (1, 0), (2, 1)
    s = (4 * tx, 4 * ty)
    assert smooth_Kinv((x[0] + s[0], x[1] + s[1]), (y[0] + s[0], y[1] + s[1]), 0.5, CACHE) == \
        smooth_Kinv(x, y, 0.5, CACHE)


def test_smooth_edge_probabilities():
    tot = {}
    for x in WHITES:
        for d in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
            p = smooth_edge_probability(x, (x[0] + d[0], x[1] + d[1]), 0.5, CACHE)
            assert 0 < p < 1
            tot[x] = tot.get(x, 0) + p
    for v in tot.values():
        assert v == pytest.approx(1, abs=1e-10)


def test_parity_errors():
    with pytest.raises(ValueError):
        smooth_Kinv((2, 0), (3, 1), 0.5)


def test_airy_against_mpmath():
    assert airy(0.0) == pytest.approx(3 ** (-2 / 3) / math.gamma(2 / 3), abs=1e-15)
    assert airy(0.0) == pytest.approx(0.3550280539, abs=1e-10)
    for z in np.linspace(-10, 5, 61):
        assert airy(z) == pytest.approx(float(mp.airyai(z)), abs=1e-10)


def test_extended_kernel_equal_times():
    assert float(airy_phi(0.3, 0.1, 0.3, 0.2)) == 0.0
    assert extended_airy(0.0, 0.0, 0.0, 0.0) == pytest.approx(float(mp.airyai(0, derivative=1) ** 2),
                                                             abs=1e-9)
    assert 0.0669 < extended_airy(0.0, 0.0, 0.0, 0.0) < 0.0670
    for z1, z2 in ((0.3, -1.2), (-2.0, 1.5)):
        assert extended_airy(0.5, z1, 0.5, z2) == pytest.approx(float(airy_stationary(z1, z2)), abs=1e-9)
        assert float(airy_stationary(z1, z2)) == pytest.approx(float(airy_stationary(z2, z1)), abs=1e-14)


def test_gaussian_part_only_forward():
    assert float(airy_phi(1.0, 0.0, 0.5, 0.0)) == 0.0
    assert float(airy_phi(0.0, 0.0, 1.0, 0.0)) > 0


def test_fredholm_trivial_weights():
    q = AiryQuery((0.0, 0.5), ((-1.0, 1.0),), np.zeros((1, 2)))
    assert fredholm_det(q) == 1.0
    assert airy_fredholm(q).det == 1.0


def gap_query(s):
    return AiryQuery((0.0,), ((s, math.inf),), np.array([[-np.inf]]))


def test_tracy_widom_value():
    res = airy_fredholm(gap_query(-2.0))
    assert res.det.real == pytest.approx(F2_MINUS_2, abs=1e-6)
    assert oracles.airy_gap(-2.0, 10.0, 60) == pytest.approx(F2_MINUS_2, abs=1e-12)


@pytest.mark.parametrize("s", [-3.0, -1.0, 0.5])
def test_gap_doubling_and_oracle(s):
    base = fredholm_det(gap_query(s), window=10.0, nodes=60).real
    assert fredholm_det(gap_query(s), window=20.0, nodes=60).real == pytest.approx(base, abs=1e-6)
    assert fredholm_det(gap_query(s), window=10.0, nodes=120).real == pytest.approx(base, abs=1e-6)
    assert base == pytest.approx(oracles.airy_gap(s, 12.0, 80), abs=1e-6)


def test_finite_interval_gap_against_oracle():
    q = AiryQuery((0.0,), ((-1.0, 1.0),), np.array([[-np.inf]]))
    assert fredholm_det(q).real == pytest.approx(oracles.airy_gap(-1.0, 1.0, 40), abs=1e-9)


def test_airy_mean_and_variance():
    q = AiryQuery((0.0,), ((-1.0, 1.0),), np.ones((1, 1)))
    mean, cov = airy_moments(q)
    assert mean[0, 0] == pytest.approx(AIRY_MEAN_UNIT, abs=1e-10)
    assert oracles.airy_mean(-1, 1) == pytest.approx(AIRY_MEAN_UNIT, abs=1e-14)
    # variance of a determinantal count: int K(x,x) - int int K(x,y)^2, via the closed-form kernel
    t, w = np.polynomial.legendre.leggauss(40)
    Km = oracles.airy_kernel_matrix(list(t))
    var = float(np.sum(w * np.diag(Km)) - w @ (Km * Km) @ w)
    assert cov[0, 0] == pytest.approx(var, abs=1e-9)


def test_mean_independent_of_line():
    q = AiryQuery((-0.5, 0.0, 0.7), ((-2.0, 0.5),), np.ones((1, 3)))
    mean, _ = airy_moments(q)
    assert np.ptp(mean) < 1e-10
    assert mean[0, 0] == pytest.approx(oracles.airy_mean(-2.0, 0.5), abs=1e-9)


def test_derivative_matches_trace():
    h = 1e-4
    ivs = ((-1.0, 1.0),)
    d = [fredholm_det(AiryQuery((0.0,), ivs, np.array([[s * h]]))) for s in (1, -1)]
    deriv = (d[0] - d[1]) / (2 * h)
    mean, _ = airy_moments(AiryQuery((0.0,), ivs, np.ones((1, 1))))
    assert deriv.real == pytest.approx(mean[0, 0], abs=1e-5)


def test_query_validation():
    with pytest.raises(ValueError):
        AiryQuery((0.0, 0.0), ((-1.0, 1.0),), np.zeros((1, 2))).validate()
    with pytest.raises(ValueError):
        AiryQuery((0.0,), ((-1.0, 1.0), (0.5, 2.0)), np.zeros((2, 1))).validate()


def test_multiline_determinant_doubling():
    q = AiryQuery((0.0, 0.4), ((-1.0, 0.5),), np.array([[0.3 + 0.2j, -0.5]]))
    d1 = fredholm_det(q, nodes=40)
    d2 = fredholm_det(q, nodes=80)
    assert abs(d1 - d2) < 1e-8


def test_k11_mode_is_the_gaussian_part():
    m, a = 64, 0.5
    ax, ay = (0.0, 0.1), (0.0, 0.4)
    x = scaled_vertex(m, a, *ax, f=(1, 0))
    y = scaled_vertex(m, a, *ay, f=(0, 1))
    full = KA_asymptotic(x, y, m, a, "K11", ax=ax, ay=ay)
    tilde = KA_asymptotic(x, y, m, a, "KA", ax=ax, ay=ay)
    ratio = full / tilde
    want = float(airy_phi(0.1, 0.01, 0.4, 0.16)) / airy_tilde(0.1, 0.01, 0.4, 0.16)
    assert ratio == pytest.approx(want, rel=1e-9)
    same = KA_asymptotic(x, scaled_vertex(m, a, *ax, f=(0, 1)), m, a, "K11", ax=ax, ay=ax)
    assert same == 0
    with pytest.raises(ValueError):
        KA_asymptotic((x[0] + 10, x[1]), y, m, a, ax=ax, ay=ay)


def test_prefactor_decay_with_vertical_separation():
    m, a = 64, 0.5
    x = scaled_vertex(m, a, 0.0, 0.0, f=(1, 0))
    y1 = scaled_vertex(m, a, 0.0, 0.0, f=(0, 1))
    y2 = (y1[0] + 2, y1[1] - 2)  # raises y1 - y2 by 4
    r = abs(KA_asymptotic(x, y2, m, a) / KA_asymptotic(x, y1, m, a))
    assert r == pytest.approx(derived_constants(a).C ** 2, rel=1e-12)


def test_split_scaling():
    # K_A = K^-1_{1,1} - K^-1 near the rough-smooth point, divided by its Airy factor
    a = 0.5
    ms = [4, 6, 8, 10, 12, 14, 16]
    vals = []
    for m in ms:
        v = scaled_vertex(m, a, 0.0, 0.0)
        x, y = (v[0] + 1, v[1]), (v[0], v[1] + 1)
        ka = KA_numeric(x, y, m, a, cache=CACHE)
        asym = KA_asymptotic(x, y, m, a, ax=(effective_alpha(x, m, a), 0.0),
                             ay=(effective_alpha(y, m, a), 0.0), fmax=99)
        r = ka / asym
        assert abs(r.imag) < 1e-9 and 0.3 < r.real < 3  # same phase, same order
        vals.append(abs(ka) / abs(asym) * (2 * m) ** (-1 / 3))
    slope = np.polyfit(np.log(ms), np.log(vals), 1)[0]
    assert abs(slope + 1 / 3) < 0.15


def test_smooth_kinv_vs_k11_along_window():
    # relative distance between the exact smooth inverse and its leading term shrinks with m
    a = 0.5
    errs = []
    for m in (2**6, 2**8, 2**10, 2**12):
        ax, ay = (0.0, 0.0), (0.0, 0.3)
        x = scaled_vertex(m, a, *ax, f=(1, 0))
        y = scaled_vertex(m, a, *ay, f=(0, 1))
        exact = smooth_Kinv(x, y, a, CACHE)
        lead = KA_asymptotic(x, y, m, a, "K11", ax=ax, ay=(0.0, 0.3))
        errs.append(abs(exact - lead) / abs(lead))
    assert errs[-1] < errs[0]
