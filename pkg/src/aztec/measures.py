"""Interface faces at the rough-smooth boundary and the measures kappa, nu, mu.

All floors are evaluated in double precision with a guard band: an argument
within ``GUARD`` of an integer raises instead of silently picking a side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .heights import a_height, corridor_height, height_function, loop_height
from .kernels import AiryQuery, airy_moments, derived_constants
from .lattice import face_kind
from .squish import decompose

GUARD = 1e-9


class InterfaceError(ValueError):
    pass


def guarded_floor(x: float, what: str = "") -> int:
    f = math.floor(x)
    if min(x - f, f + 1 - x) < GUARD and abs(x - round(x)) < GUARD and x != round(x):
        raise InterfaceError(f"floor argument {x!r} {what} lies within {GUARD} of an integer")
    return int(f)


def default_M(m: int) -> int:
    return int(math.ceil(math.log(m) ** 2))


@dataclass(frozen=True)
class InterfaceSpec:
    m: int
    a: float
    M: int
    betas: tuple
    intervals: tuple
    rho: int
    tau: tuple  # per line
    Jl: dict = field(repr=False)  # (p, q, k1, k2) -> face
    Jr: dict = field(repr=False)

    @property
    def n(self) -> int:
        return 4 * self.m

    def pairs(self, p: int, q: int, k1: int = 1, k2: int = 1):
        return self.Jl[(p, q, k1, k2)], self.Jr[(p, q, k1, k2)]


def resolve_interface(m: int, a: float, betas, intervals, M: int | None = None,
                      k2_range: int | None = None) -> InterfaceSpec:
    """Resolve every J^l, J^r face for k1 in 1..M and k2 in 1..k2_range (default M)."""
    if int(m) != m or m < 2:
        raise InterfaceError("m must be an integer >= 2 (log m appears in the offsets)")
    betas = tuple(float(b) for b in betas)
    intervals = tuple((float(l), float(r)) for l, r in intervals)
    if any(np.diff(betas) <= 0):
        raise InterfaceError("lines must be strictly increasing")
    for l, r in intervals:
        if not l < r or not (math.isfinite(l) and math.isfinite(r)):
            raise InterfaceError(f"interval [{l}, {r}] must be finite and non-empty")
    srt = sorted(intervals)
    if any(b[0] < a_[1] for a_, b in zip(srt, srt[1:])):
        raise InterfaceError("intervals overlap")
    M = default_M(m) if M is None else int(M)
    if M < 1:
        raise InterfaceError("M must be positive")
    K2 = M if k2_range is None else int(k2_range)
    K = derived_constants(a)
    L = math.log(m) ** 2
    s13, s23 = (2 * m) ** (1 / 3), (2 * m) ** (2 / 3)
    rho = 4 * guarded_floor(m * (1 + K.xi), "in rho_m")
    tau = tuple(guarded_floor(b * b * K.lam1 * s13, f"in tau_m({q})") for q, b in enumerate(betas, 1))
    n = 4 * m
    Jl, Jr = {}, {}
    for q, beta in enumerate(betas, 1):
        for k2 in range(1, K2 + 1):
            bm = 2 * guarded_floor(beta * K.lam2 * s23 + k2 * K.lam2 * L, f"in beta_m({q},{k2})")
            for p, (al, ar) in enumerate(intervals, 1):
                for k1 in range(1, M + 1):
                    sl = rho + 2 * guarded_floor(al * K.lam1 * s13 - K.lam1 * k1 * L,
                                                 f"in J^l({p},{q},{k1},{k2})") - 1 - 2 * tau[q - 1]
                    sr = rho + 2 * guarded_floor(ar * K.lam1 * s13 + K.lam1 * k1 * L,
                                                 f"in J^r({p},{q},{k1},{k2})") + 1 - 2 * tau[q - 1]
                    for side, s, store in (("l", sl, Jl), ("r", sr, Jr)):
                        face = (s + bm, s - bm)  # s e1 - bm e2
                        if not (1 <= face[0] <= 2 * n - 1 and 1 <= face[1] <= 2 * n - 1):
                            raise InterfaceError(
                                f"J^{side}_{{{p},{q},{k1},{k2}}} = {face} lies outside the "
                                f"order-{n} diamond")
                        if face_kind(*face) != "a":
                            raise InterfaceError(f"J^{side}_{{{p},{q},{k1},{k2}}} = {face} is not an a-face")
                        store[(p, q, k1, k2)] = face
    return InterfaceSpec(m, float(a), M, betas, intervals, rho, tau, Jl, Jr)


def max_in_bounds_M(m: int, a: float, betas, intervals, cap: int = 64) -> int:
    """Largest M for which every J face with k2 = 1 stays inside the diamond (0 if none)."""
    best = 0
    for M in range(1, cap + 1):
        try:
            resolve_interface(m, a, betas, intervals, M, k2_range=1)
        except InterfaceError:
            break
        best = M
    return best


@dataclass
class SampleHeights:
    """Height fields of one covering needed by the interface measures."""

    h: object
    ha: object
    hl: object
    hc: object

    @classmethod
    def from_covering(cls, cov):
        h = height_function(cov)
        ha = a_height(h)
        dec = decompose(cov, h)
        hl = loop_height(dec)
        return cls(h, ha, hl, corridor_height(ha, hl))


def _heights(cov_or_heights) -> SampleHeights:
    if isinstance(cov_or_heights, SampleHeights):
        return cov_or_heights
    return SampleHeights.from_covering(cov_or_heights)


def kappa(cov, spec: InterfaceSpec, p: int, q: int) -> int:
    s = _heights(cov)
    jl, jr = spec.pairs(p, q, 1, 1)
    d = s.hc(*jr) - s.hc(*jl)
    if d % 4:
        raise ArithmeticError("corridor heights differ by a non-multiple of 4")
    return d // 4


def nu(cov, spec: InterfaceSpec, p: int, q: int) -> float:
    s = _heights(cov)
    tot = sum(s.ha(*spec.Jr[(p, q, k, 1)]) - s.ha(*spec.Jl[(p, q, k, 1)]) for k in range(1, spec.M + 1))
    return tot / (4 * spec.M)


def mu(cov, spec: InterfaceSpec, p: int, q: int) -> float:
    s = _heights(cov)
    tot = sum(s.h(*spec.Jr[(p, q, 1, k)]) - s.h(*spec.Jl[(p, q, 1, k)]) for k in range(1, spec.M + 1))
    return tot / (4 * spec.M)


@dataclass
class Stat:
    """Running (count, sum, sum of squares), mergeable in any order."""

    n: int = 0
    s: float = 0.0
    ss: float = 0.0
    values: list = field(default_factory=list)

    def add(self, x: float):
        self.n += 1
        self.s += x
        self.ss += x * x
        self.values.append(x)

    @property
    def mean(self) -> float:
        return self.s / self.n

    @property
    def var(self) -> float:
        if self.n < 2:
            return float("nan")
        return (self.ss - self.s * self.s / self.n) / (self.n - 1)

    @property
    def se(self) -> float:
        return math.sqrt(self.var / self.n)

    def histogram(self) -> dict:
        vals, cnt = np.unique(np.asarray(self.values), return_counts=True)
        return {float(v): int(c) for v, c in zip(vals, cnt)}


def interface_ensemble(cfg, spec: InterfaceSpec, n_samples: int, start: int = 0):
    """Moments of kappa, nu, mu and kappa - nu over sampled coverings, with Airy references."""
    from .sampler import sample_many

    if cfg.m != spec.m or cfg.a != spec.a:
        raise ValueError("sampler and interface disagree on m or a")
    keys = [(p, q) for p in range(1, len(spec.intervals) + 1) for q in range(1, len(spec.betas) + 1)]
    stats = {(k, name): Stat() for k in keys for name in ("kappa", "nu", "mu", "kappa-nu")}
    for cov in sample_many(cfg, n_samples, start):
        s = SampleHeights.from_covering(cov)
        for (p, q) in keys:
            kp, nv = kappa(s, spec, p, q), nu(s, spec, p, q)
            stats[((p, q), "kappa")].add(kp)
            stats[((p, q), "nu")].add(nv)
            stats[((p, q), "mu")].add(mu(s, spec, p, q))
            stats[((p, q), "kappa-nu")].add(kp - nv)
    mean, cov_ = airy_moments(AiryQuery(spec.betas, spec.intervals,
                                        np.ones((len(spec.intervals), len(spec.betas)))))
    flat = {k: i for i, k in enumerate(keys)}
    rows = []
    for (k, name), st in stats.items():
        p, q = k
        oracle = {"kappa": mean[p - 1, q - 1], "nu": mean[p - 1, q - 1],
                  "mu": mean[p - 1, q - 1], "kappa-nu": 0.0}[name]
        rows.append({
            "p": p, "q": q, "statistic": name, "value": st.mean, "stderr": st.se,
            "variance": st.var, "oracle_value": float(oracle),
            "oracle_variance": float(cov_[flat[k], flat[k]]) if name != "kappa-nu" else 0.0,
            "histogram": st.histogram(),
        })
    flags = []
    if spec.a >= 1 / 3:
        flags.append("outside the a < 1/3 regime: Airy references are not guaranteed")
    return rows, flags
