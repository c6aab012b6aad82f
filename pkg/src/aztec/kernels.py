"""Analytic objects of the two-periodic model evaluated numerically.

Covers the scale constants, the characteristic polynomial c~, the
coefficients E_{k,l}, the full-plane smooth-phase inverse Kasteleyn matrix,
the (extended) Airy kernel with its Fredholm determinants, and the leading
rough-smooth asymptotics of the inverse Kasteleyn matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .lattice import kasteleyn_entry


def h(e1: int, e2: int) -> int:
    return e1 * (1 - e2) + e2 * (1 - e1)


@dataclass(frozen=True)
class DerivedConstants:
    a: float
    c: float
    xi: float
    c0: float
    lam1: float
    lam2: float
    C: float  # decay constant of the smooth phase
    g: dict = field(repr=False)

    @staticmethod
    def h(e1: int, e2: int) -> int:
        return h(e1, e2)


def derived_constants(a: float) -> DerivedConstants:
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a!r}")
    c = a / (1 + a * a)
    r = np.sqrt(1 - 2 * c)
    c0 = (1 - 2 * c) ** (2 / 3) / (2 * c * (1 + 2 * c)) ** (1 / 3)
    s = np.sqrt(a * a + 1)
    g = {
        (0, 0): 1j * (s + a) / (1 - a),
        (0, 1): (s + a - 1) / (np.sqrt(2 * a) * (1 - a)) + 0j,
        (1, 0): -(s + a - 1) / (np.sqrt(2 * a) * (1 - a)) + 0j,
        (1, 1): 1j * (s - 1) / ((1 - a) * a),
    }
    return DerivedConstants(
        a=a, c=c, xi=-0.5 * r, c0=c0, lam1=r / (2 * c0),
        lam2=(1 - 2 * c) ** 1.5 / (2 * c * c0 * c0), C=(1 - r) / np.sqrt(2 * c), g=g,
    )


def ctilde(u1, u2, a: float):
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    if np.any(u1 == 0) or np.any(u2 == 0):
        raise ZeroDivisionError("c~ is undefined at u = 0")
    return 2 * (1 + a * a) + a * (u1 + 1 / u1) * (u2 + 1 / u2)


# ---------------------------------------------------------------- E_{k,l}

def _shift_radius(k: int, l: int, c: float, factor: float = 0.8) -> float:
    """Log radius for the u2 circle that balances the size of u2^k r(u2)^l.

    The pair (s1, s2) minimising l s1 + k s2 on cosh s1 cosh s2 = 1/(2c) is
    the saddle of the Laurent coefficient; we keep a fixed fraction of s2 so
    the contour stays clear of the zero set of c~.
    """
    if k == 0:
        return 0.0
    S = np.arccosh(1 / (2 * c))
    if l == 0:
        return -factor * S

    def f(s1):
        return l * (-s1) + k * (-np.arccosh(1 / (2 * c * np.cosh(s1))))

    res = optimize.minimize_scalar(f, bounds=(0.0, S * (1 - 1e-12)), method="bounded")
    s2 = np.arccosh(1 / (2 * c * np.cosh(res.x)))
    return -factor * s2


def _e_trapezoid(k: int, l: int, a: float, s2: float, N: int) -> float:
    """Mean over the u2 circle of u2^k r^l / (beta (r - 1/r)).

    The u1 integral on the unit circle is done by residues: with
    alpha = 2(1 + a^2) and beta = a (u2 + 1/u2), the only pole inside is the
    root r of beta u^2 + alpha u + beta with |r| < 1.
    """
    th = 2 * np.pi * np.arange(N) / N
    u2 = np.exp(s2 + 1j * th)
    alpha = 2 * (1 + a * a)
    beta = a * (u2 + 1 / u2)
    sq = np.sqrt(alpha * alpha - 4 * beta * beta + 0j)
    sq = np.where(np.abs(alpha + sq) >= np.abs(alpha - sq), sq, -sq)
    r = -2 * beta / (alpha + sq)  # the root inside the unit circle; beta (r - 1/r) = sq
    vals = u2**k * r**l / sq
    return float(np.mean(vals).real)


class KernelCache:
    """Memo table of E_{k,l} for one value of a."""

    def __init__(self, a: float, rtol: float = 1e-10, n0: int = 64, nmax: int = 1 << 16):
        self.a = float(a)
        self.consts = derived_constants(a)
        self.rtol = rtol
        self.n0 = n0
        self.nmax = nmax
        self.table: dict[tuple[int, int], float] = {}
        self.resolution: dict[tuple[int, int], int] = {}

    def E(self, k: int, l: int) -> float:
        # c~ is invariant under u_i -> 1/u_i and under swapping u1, u2
        key = tuple(sorted((abs(int(k)), abs(int(l)))))
        if key not in self.table:
            self.table[key] = self._compute(*key)
        return self.table[key]

    def _compute(self, k: int, l: int) -> float:
        if (k + l) % 2:
            self.resolution[(k, l)] = 0
            return 0.0  # c~(-u1, -u2) = c~(u1, u2)
        # put the larger index on u1, where it is handled exactly by r^l
        k, l = min(k, l), max(k, l)
        s2 = _shift_radius(k, l, self.consts.c)
        N = self.n0
        prev = _e_trapezoid(k, l, self.a, s2, N)
        while N < self.nmax:
            N *= 2
            cur = _e_trapezoid(k, l, self.a, s2, N)
            if abs(cur - prev) <= self.rtol * abs(cur) + 1e-300:
                self.resolution[(k, l)] = N
                return cur
            prev = cur
        raise ArithmeticError(f"E_{{{k},{l}}} did not converge with {N} nodes")


def E_kl(k: int, l: int, a: float, cache: KernelCache | None = None) -> float:
    if cache is None:
        cache = KernelCache(a)
    elif cache.a != a:
        raise ValueError("cache belongs to a different a")
    return cache.E(k, l)


def E_kl_torus(k: int, l: int, a: float, N: int = 512) -> float:
    """Plain 2-D periodic trapezoid rule on the unit torus (reference values)."""
    th = 2 * np.pi * np.arange(N) / N
    u1 = np.exp(1j * th)[:, None]
    u2 = np.exp(1j * th)[None, :]
    return float(np.mean(u1**l * u2**k / ctilde(u1, u2, a)).real)


def decay_slope(a: float, bs, diagonal: bool = False, cache: KernelCache | None = None):
    """Per-step log decay of E_{2b,0} (or E_{b,b}) between consecutive b, per unit 2b."""
    cache = cache or KernelCache(a)
    bs = np.asarray(bs)
    if diagonal:
        vals = np.array([cache.E(b, b) for b in bs])
    else:
        vals = np.array([cache.E(2 * b, 0) for b in bs])
    logs = np.log(np.abs(vals))
    return np.diff(logs) / (2 * np.diff(bs)), vals


# ----------------------------------------------------- smooth-phase inverse

def _parity(v) -> int:
    return ((v[0] + v[1]) % 4 - 1) // 2


def _check_pair(x, y):
    if not (x[0] % 2 == 1 and x[1] % 2 == 0):
        raise ValueError(f"{x} is not a white vertex")
    if not (y[0] % 2 == 0 and y[1] % 2 == 1):
        raise ValueError(f"{y} is not a black vertex")


def kl_indices(x, y):
    """((k1, l1), (k2, l2)) for the E-representation of K^-1(x, y)."""
    e1, e2 = _parity(x), _parity(y)
    hh = h(e1, e2)
    k1 = (x[1] - y[1] - 1) // 2 + hh
    l1 = (y[0] - x[0] - 1) // 2
    k2 = (x[1] - y[1] + 1) // 2 - hh
    l2 = (y[0] - x[0] + 1) // 2
    return (k1, l1), (k2, l2)


def smooth_Kinv(x, y, a: float, cache: KernelCache | None = None) -> complex:
    """Full-plane smooth-phase K^-1(x, y), x white and y black."""
    _check_pair(x, y)
    cache = cache or KernelCache(a)
    e1, e2 = _parity(x), _parity(y)
    (k1, l1), (k2, l2) = kl_indices(x, y)
    val = a**e2 * cache.E(k1, l1) + a ** (1 - e2) * cache.E(k2, l2)
    return -(1j ** (1 + h(e1, e2))) * val


def smooth_Kinv_direct(x, y, a: float, N: int = 256) -> complex:
    """The same quantity straight from the double contour integral."""
    _check_pair(x, y)
    e1, e2 = _parity(x), _parity(y)
    hh = h(e1, e2)
    th = 2 * np.pi * np.arange(N) / N
    u1 = np.exp(1j * th)[:, None]
    u2 = np.exp(1j * th)[None, :]
    p1 = (x[0] - y[0] + 1) // 2
    p2 = (x[1] - y[1] + 1) // 2
    num = a**e2 * u2 ** (1 - hh) + a ** (1 - e2) * u1 * u2**hh
    integrand = num / (ctilde(u1, u2, a) * u1**p1 * u2**p2)
    return complex(-(1j ** (1 + hh)) * np.mean(integrand))


def smooth_edge_probability(white, black, a: float, cache=None) -> float:
    """Probability that the edge (white, black) is covered in the smooth phase."""
    K = kasteleyn_entry(black, white, a, 1.0)
    return float((K * smooth_Kinv(white, black, a, cache)).real)


# ----------------------------------------------------------------- Airy

def airy(x):
    return special.airy(x)[0]


def airy_stationary(z1, z2):
    """Airy kernel at equal times, in closed form."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    a1, ap1, _, _ = special.airy(z1)
    a2, ap2, _, _ = special.airy(z2)
    diag = ap1 * ap1 - z1 * a1 * a1
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (a1 * ap2 - ap1 * a2) / (z1 - z2)
    return np.where(np.isclose(z1, z2, rtol=0, atol=1e-12), diag, off)


def airy_density(z):
    """One-point density Ai'(z)^2 - z Ai(z)^2 of the Airy process."""
    ai, aip, _, _ = special.airy(z)
    return aip * aip - z * ai * ai


def _lambda_cutoff(zmin: float, growth: float, eps: float = 1e-14) -> float:
    """Smallest L with e^{growth L} |Ai(zmin + t)| below eps for t >= L."""
    L = max(1.0, -zmin + 1.0)
    while np.exp(growth * L) * abs(airy(zmin + L)) > eps or airy(zmin + L) < 0:
        L *= 1.25
    return L


class AiryLambdaRule:
    """Gauss-Legendre rule for the lambda integral in the extended kernel."""

    def __init__(self, zmin: float, max_growth: float = 0.0, nodes: int = 200):
        self.L = _lambda_cutoff(zmin, max(max_growth, 0.0))
        x, w = np.polynomial.legendre.leggauss(nodes)
        self.lam = 0.5 * self.L * (x + 1)
        self.w = 0.5 * self.L * w

    def tilde(self, t1: float, z1, t2: float, z2) -> np.ndarray:
        """Matrix of A~(t1, z1_i; t2, z2_j)."""
        z1 = np.atleast_1d(np.asarray(z1, dtype=float))
        z2 = np.atleast_1d(np.asarray(z2, dtype=float))
        A1 = airy(z1[:, None] + self.lam[None, :])
        A2 = airy(z2[:, None] + self.lam[None, :])
        return (A1 * (self.w * np.exp(-self.lam * (t1 - t2)))[None, :]) @ A2.T


def airy_phi(t1: float, z1, t2: float, z2):
    """Gaussian part of the extended kernel; zero unless t1 < t2."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if not t1 < t2:
        return np.zeros(np.broadcast(z1, z2).shape)
    d = t2 - t1
    return np.exp(-((z1 - z2) ** 2) / (4 * d) - d * (z1 + z2) / 2 + d**3 / 12) / np.sqrt(4 * np.pi * d)


def airy_tilde(t1: float, z1: float, t2: float, z2: float, nodes: int = 200) -> float:
    rule = AiryLambdaRule(min(z1, z2), t2 - t1, nodes)
    return float(rule.tilde(t1, z1, t2, z2)[0, 0])


def extended_airy(t1: float, z1: float, t2: float, z2: float, nodes: int = 200) -> float:
    return airy_tilde(t1, z1, t2, z2, nodes) - float(airy_phi(t1, z1, t2, z2))


@dataclass(frozen=True)
class AiryQuery:
    betas: tuple  # strictly increasing lines
    intervals: tuple  # disjoint (left, right) pairs; +-inf allowed
    weights: np.ndarray  # complex, shape (len(intervals), len(betas))

    def validate(self):
        b = np.asarray(self.betas, dtype=float)
        if b.ndim != 1 or b.size == 0 or np.any(np.diff(b) <= 0):
            raise ValueError("lines must be strictly increasing")
        iv = sorted(self.intervals)
        for (l, r) in iv:
            if not l < r:
                raise ValueError(f"empty interval [{l}, {r}]")
        for (l1, r1), (l2, r2) in zip(iv, iv[1:]):
            if l2 < r1:
                raise ValueError("intervals overlap")
        if np.shape(self.weights) != (len(self.intervals), len(self.betas)):
            raise ValueError("weights must have shape (intervals, lines)")


def _blocks(q: AiryQuery, window: float, nodes: int):
    """Quadrature nodes for every (interval, line) block with nonzero weight."""
    out = []
    for p, (l, r) in enumerate(q.intervals):
        # only infinite ends are truncated; finite intervals are integrated in full
        lo = l if np.isfinite(l) else -window
        hi = r if np.isfinite(r) else max(window, lo + window)
        if not lo < hi:
            continue
        k = int(nodes * max(1.0, (hi - lo) / 4.0))  # Ai oscillates for z < 0
        x, w = np.polynomial.legendre.leggauss(k)
        z = lo + (hi - lo) * (x + 1) / 2
        qw = (hi - lo) / 2 * w
        for j, beta in enumerate(q.betas):
            wt = complex(q.weights[p][j])
            if wt != 0:
                out.append((float(beta), z, qw, np.expm1(wt)))
    return out


def _fredholm_matrix(blocks, lam_nodes: int = 200):
    if not blocks:
        return np.zeros((0, 0), dtype=complex), 0
    zmin = min(b[1].min() for b in blocks)
    betas = [b[0] for b in blocks]
    rule = AiryLambdaRule(zmin, max(betas) - min(betas), lam_nodes)
    sizes = [b[1].size for b in blocks]
    off = np.concatenate([[0], np.cumsum(sizes)])
    N = off[-1]
    M = np.zeros((N, N), dtype=complex)
    for i, (ti, zi, wi, fi) in enumerate(blocks):
        for j, (tj, zj, wj, fj) in enumerate(blocks):
            K = rule.tilde(ti, zi, tj, zj) - airy_phi(ti, zi[:, None], tj, zj[None, :])
            M[off[i]:off[i + 1], off[j]:off[j + 1]] = (
                np.sqrt(wi)[:, None] * fi * K * np.sqrt(wj)[None, :]
            )
    return M, N


def fredholm_det(q: AiryQuery, window: float = 10.0, nodes: int = 60, lam_nodes: int = 200) -> complex:
    q.validate()
    M, N = _fredholm_matrix(_blocks(q, window, nodes), lam_nodes)
    if N == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(np.eye(N) + M))


@dataclass
class FredholmResult:
    det: complex
    mean: np.ndarray  # E[count] per (interval, line)
    cov: np.ndarray  # covariance of the counts, flattened (interval, line) order
    nodes: int
    window: float


def airy_moments(q: AiryQuery, window: float = 10.0, nodes: int = 60, lam_nodes: int = 200):
    """Means and covariance of the counts mu_Ai({beta_q} x A_p)."""
    unit = AiryQuery(q.betas, q.intervals, np.ones((len(q.intervals), len(q.betas))))
    blocks = _blocks(unit, window, nodes)
    zmin = min(b[1].min() for b in blocks)
    rule = AiryLambdaRule(zmin, max(q.betas) - min(q.betas), lam_nodes)
    k = len(blocks)
    mean = np.empty(k)
    cov = np.empty((k, k))
    for i, (ti, zi, wi, _) in enumerate(blocks):
        mean[i] = np.sum(wi * airy_density(zi))
        for j, (tj, zj, wj, _) in enumerate(blocks):
            Kij = rule.tilde(ti, zi, tj, zj) - airy_phi(ti, zi[:, None], tj, zj[None, :])
            Kji = rule.tilde(tj, zj, ti, zi) - airy_phi(tj, zj[:, None], ti, zi[None, :])
            cov[i, j] = -np.sum(wi[:, None] * Kij * Kji.T * wj[None, :])
        cov[i, i] += mean[i]
    shape = (len(q.intervals), len(q.betas))
    return mean.reshape(shape), cov


def airy_fredholm(q: AiryQuery, window: float = 10.0, nodes: int = 60, tol: float = 1e-10,
                  max_nodes: int = 960) -> FredholmResult:
    """det(I + (e^Psi - 1) A) with node and window doubling until stable."""
    q.validate()
    cur = fredholm_det(q, window, nodes)
    while True:
        nxt = fredholm_det(q, window, 2 * nodes)
        if abs(nxt - cur) <= tol:
            break
        nodes *= 2
        cur = nxt
        if nodes > max_nodes:
            raise ArithmeticError("Fredholm determinant did not converge under node doubling")
    unbounded = any(np.isinf(l) or np.isinf(r) for l, r in q.intervals)
    if unbounded:
        wide = fredholm_det(q, 2 * window, nodes)
        if abs(wide - cur) > tol:
            raise ArithmeticError("Fredholm determinant depends on the truncation window")
    mean, cov = airy_moments(q, window, nodes)
    return FredholmResult(cur, mean, cov, nodes, window)


# -------------------------------------------------- rough-smooth asymptotics

def scaled_vertex(m: int, a: float, alpha: float, beta: float, k1: int = 0, k2: int = 0,
                  f=(0, 0)) -> tuple[int, int]:
    """A point at the rough-smooth boundary: s e1 - t e2 + f."""
    K = derived_constants(a)
    L = np.log(m) ** 2
    rho = 4 * int(np.floor(m * (1 + K.xi)))
    s = rho + 2 * int(np.floor(alpha * K.lam1 * (2 * m) ** (1 / 3) + k1 * K.lam1 * L))
    t = 2 * int(np.floor(beta * K.lam2 * (2 * m) ** (2 / 3) + k2 * K.lam2 * L))
    return (s + t + int(f[0]), s - t + int(f[1]))


def KA_asymptotic(x, y, m: int, a: float, mode: str = "KA", ax=(0.0, 0.0), ay=(0.0, 0.0),
                  fmax: int = 4) -> complex:
    """Leading term of K_A(x, y) (mode 'KA') or of the smooth inverse (mode 'K11').

    ``ax = (alpha_x, beta_x)`` and ``ay`` are the scaled coordinates that
    generated the white vertex x and black vertex y.
    """
    _check_pair(x, y)
    (alx, bx), (aly, by) = ax, ay
    base_x = scaled_vertex(m, a, alx, bx)
    base_y = scaled_vertex(m, a, aly, by)
    fx = (x[0] - base_x[0], x[1] - base_x[1])
    fy = (y[0] - base_y[0], y[1] - base_y[1])
    if max(map(abs, fx + fy)) > fmax:
        raise ValueError(f"offsets {fx}, {fy} leave the validated window |f| <= {fmax}")
    K = derived_constants(a)
    ex, ey = _parity(x), _parity(y)
    twice = -2 - x[0] + x[1] + y[0] - y[1]
    if twice % 2:
        raise ArithmeticError("non-integer power of the decay constant")
    pref = (1j ** ((y[0] - x[0] + 1) % 4)) * K.C ** (twice / 2) * K.c0 * K.g[(ex, ey)]
    pref *= np.exp(aly * by - alx * bx - (2 / 3) * (bx**3 - by**3)) * (2 * m) ** (-1 / 3)
    z1, z2 = alx + bx * bx, aly + by * by
    if mode == "KA":
        return complex(pref * airy_tilde(bx, z1, by, z2))
    if mode == "K11":
        return complex(pref * float(airy_phi(bx, z1, by, z2)))
    raise ValueError(f"unknown mode {mode!r}")


def effective_alpha(v, m: int, a: float) -> float:
    """Unfloored alpha of a vertex on the main diagonal direction (beta = 0)."""
    K = derived_constants(a)
    s = (v[0] + v[1]) / 2
    return (s - 4 * m * (1 + K.xi)) / (2 * K.lam1 * (2 * m) ** (1 / 3))


def KA_numeric(x, y, m: int, a: float, inv=None, cache: KernelCache | None = None) -> complex:
    """K_A defined by K^-1 = K^-1_{1,1} - K_A with the finite inverse of D_m."""
    from .lattice import KinvColumns, build_diamond

    _check_pair(x, y)
    if inv is None:
        g = build_diamond(m, a)
        inv = KinvColumns(g.whites, g.blacks, a)
    return complex(smooth_Kinv(x, y, a, cache) - inv(x, y))
