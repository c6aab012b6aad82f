"""Verification harness: Boltzmann exactness, Peierls tails, couplings, symmetry."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .kernels import KernelCache, derived_constants, smooth_Kinv
from .lattice import DIRS, KinvColumns, aztec_graph, build_diamond, enumerate_coverings, kasteleyn_entry
from .sampler import SamplerConfig, make_rng, sample_many, shuffle_frame, creation_probabilities, frame_to_dirs
from .squish import DOUBLE, LOOP, decompose

F_STEPS = ((1, 1), (-1, 1), (-1, -1), (1, -1))  # e1, e2, -e1, -e2


def clopper_pearson(k: int, n: int, conf: float = 0.99) -> tuple[float, float]:
    """One-sided (lower, upper) bounds at the given confidence."""
    lo = 0.0 if k == 0 else float(stats.beta.ppf(1 - conf, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(conf, k + 1, n - k))
    return lo, hi


@dataclass
class BoundReport:
    name: str
    params: dict
    bound: float
    value: float
    upper: float = float("nan")
    passed: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------ Boltzmann

def pool_cells(obs, exp, min_expected: float = 5.0):
    """Merge the sparsest cells, in order of expectation, into groups of expected count >= min_expected.

    A trailing group that stays below the threshold joins the last full one.
    """
    obs, exp = np.asarray(obs, dtype=float), np.asarray(exp, dtype=float)
    keep = exp >= min_expected
    o_out, e_out = list(obs[keep]), list(exp[keep])
    go = ge = 0.0
    for t in np.argsort(exp[~keep], kind="stable"):
        go += obs[~keep][t]
        ge += exp[~keep][t]
        if ge >= min_expected:
            o_out.append(go)
            e_out.append(ge)
            go = ge = 0.0
    if ge > 0:
        if e_out:
            o_out[-1] += go
            e_out[-1] += ge
        else:
            o_out.append(go)
            e_out.append(ge)
    return np.array(o_out), np.array(e_out)


def boltzmann_chi2(a: float, samples: int, seed: int = 0, n: int = 4, min_expected: float = 5.0):
    """Chi-squared test of shuffling frequencies against enumerated weights."""
    g = aztec_graph(n, a)
    covs = enumerate_coverings(g)
    keys = {c.key(): i for i, (c, _) in enumerate(covs)}
    w = np.array([x for _, x in covs])
    p = w / w.sum()
    probs = creation_probabilities(n, float(a), 1.0)
    counts = np.zeros(len(covs), dtype=np.int64)
    from .lattice import Covering

    for i in range(samples):
        dirs = frame_to_dirs(shuffle_frame(n, probs, make_rng(seed, i)))
        counts[keys[Covering(n, dirs).key()]] += 1
    exp = p * samples
    obs_b, exp_b = pool_cells(counts, exp, min_expected)
    chi2, pval = stats.chisquare(obs_b, exp_b)
    return {"a": a, "n": n, "samples": samples, "states": len(covs), "bins": int(obs_b.size),
            "chi2": float(chi2), "p_value": float(pval)}


# ------------------------------------------------------------ Peierls

def center_a_edge(n: int):
    """(white, black) of an a-edge bordering the a-face next to the center."""
    c = n + 1 if (2 * n + 2) % 4 == 2 else n - 1
    return (c, c - 1), (c - 1, c)


def _edge_index(edge):
    (wx, wy), (bx, by) = edge
    code = [tuple(d) for d in DIRS.tolist()].index((bx - wx, by - wy))
    return (wx - 1) // 2, wy // 2, code


def _loop_length_at(dec, S) -> int:
    """Longest loop through any edge of S (0 if none)."""
    best = 0
    lens = np.diff(dec.starts)
    for p, q, code in S:
        if dec.sq.dirs[p, q] == code and dec.kind[p, q] == LOOP:
            best = max(best, int(lens[dec.obj[p, q]]))
    return best


def _double_chain_at(dec, S) -> int:
    """Largest number of a-dimers in a chain of double edges through S (0 if none)."""
    mask = dec.kind == DOUBLE
    if not any(dec.sq.dirs[p, q] == c and mask[p, q] for p, q, c in S):
        return 0
    t = dec.sq.tail[mask]
    h = dec.sq.head[mask]
    parent = {}

    def find(u):
        while parent.setdefault(u, u) != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    pairs = set()
    for a_, b_ in zip(map(tuple, t), map(tuple, h)):
        pairs.add(tuple(sorted((a_, b_))))
        parent[find(a_)] = find(b_)
    size = {}
    for a_, _ in pairs:
        r = find(a_)
        size[r] = size.get(r, 0) + 1
    best = 0
    for p, q, c in S:
        if dec.sq.dirs[p, q] == c and mask[p, q]:
            r = find(tuple(dec.sq.tail[p, q]))
            best = max(best, 2 * size[r])
    return best


def _tail_reports(name, a, ds, S, values, bound_fn, params):
    out = []
    N = len(values)
    for d in ds:
        k = int(np.sum(np.asarray(values) >= d))
        _, hi = clopper_pearson(k, N)
        b = bound_fn(d)
        out.append(BoundReport(name, dict(params, d=d, S=len(S), samples=N), b, k / N, hi, hi <= b))
    return out


def peierls_loops(a: float, ds, samples: int, n: int = 128, S=None, seed: int = 0):
    """Tail of the longest loop through S against |S|(3a)^d / (1 - 3a)."""
    if not 0 < a < 1 / 3:
        raise ValueError("the loop bound needs a in (0, 1/3)")
    S = [center_a_edge(n)] if S is None else list(S)
    idx = [_edge_index(e) for e in S]
    vals = [_loop_length_at(decompose(c), idx) for c in _samples(n, a, seed, samples)]
    return _tail_reports("peierls_loops", a, ds, S, vals,
                         lambda d: len(S) * (3 * a) ** d / (1 - 3 * a), {"a": a, "n": n})


def peierls_double_edges(a: float, ds, samples: int, n: int = 128, S=None, seed: int = 0):
    """Tail of the longest double-edge chain through S against 2|S| a^d / (1 - a)."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    S = [center_a_edge(n)] if S is None else list(S)
    idx = [_edge_index(e) for e in S]
    vals = [_double_chain_at(decompose(c), idx) for c in _samples(n, a, seed, samples)]
    return _tail_reports("peierls_double_edges", a, ds, S, vals,
                         lambda d: 2 * len(S) * a**d / (1 - a), {"a": a, "n": n})


def _samples(n, a, seed, count):
    from .lattice import Covering

    probs = creation_probabilities(n, float(a), 1.0)
    for i in range(count):
        yield Covering(n, frame_to_dirs(shuffle_frame(n, probs, make_rng(seed, i))), seed=seed)


def polygon_counts(dmax: int = 10) -> dict:
    """Self-avoiding polygons of each length through a fixed edge of the square lattice.

    These are the loop shapes the Peierls count bounds by 3^d (after squishing,
    a-dimers form a square lattice of b-face centers).
    """
    counts = {}
    start, nxt = (0, 0), (1, 0)
    steps = ((1, 0), (0, 1), (-1, 0), (0, -1))

    def rec(path, seen, length):
        x, y = path[-1]
        for dx, dy in steps:
            u = (x + dx, y + dy)
            if u == start and length + 1 >= 4:
                counts[length + 1] = counts.get(length + 1, 0) + 1
            elif u not in seen and length + 1 < dmax:
                seen.add(u)
                path.append(u)
                rec(path, seen, length + 1)
                path.pop()
                seen.discard(u)

    # the first step is fixed, so every polygon through the edge is traced exactly once
    rec([start, nxt], {start, nxt}, 1)
    return dict(sorted(counts.items()))


# ------------------------------------------------------------ couplings

def box_whites_L2(face):
    """Whites of Lambda(face, 2) and its boundary: R = L^2/2 + 2L = 6."""
    u, v = face
    return [(u, v - 1), (u, v + 1), (u - 2, v - 1), (u + 2, v - 1), (u - 2, v + 1), (u + 2, v + 1)]


def _config_probs(whites, kinv, a: float, chunk: int = 4096):
    """p(s) = det(K(b_i, w_i) K^-1(w_j, b_i)) for every s in [4]^R, b_i = w_i + f_{s_i}.

    Returns (probs, configs) with overlapping configurations set to exactly 0.
    """
    R = len(whites)
    blacks = sorted({(w[0] + f[0], w[1] + f[1]) for w in whites for f in F_STEPS})
    bid = {b: t for t, b in enumerate(blacks)}
    G = np.array([[kinv(w, b) for b in blacks] for w in whites])  # (R, nb)
    Kb = np.array([[kasteleyn_entry((w[0] + f[0], w[1] + f[1]), w, a, 1.0) for f in F_STEPS] for w in whites])
    nbr = np.array([[bid[(w[0] + f[0], w[1] + f[1])] for f in F_STEPS] for w in whites])
    configs = np.array(list(itertools.product(range(4), repeat=R)), dtype=np.int64)
    probs = np.zeros(len(configs))
    for s in range(0, len(configs), chunk):
        S = configs[s:s + chunk]
        b = nbr[np.arange(R)[None, :], S]  # (c, R) black index per row
        kb = Kb[np.arange(R)[None, :], S]
        # L[c, i, j] = K(b_i, w_i) K^-1(w_j, b_i)
        L = np.transpose(G[:, b], (1, 2, 0)) * kb[:, :, None]
        d = np.linalg.det(L)
        srt = np.sort(b, axis=1)
        overlap = (np.diff(srt, axis=1) == 0).any(axis=1)
        d[overlap] = 0.0
        if np.abs(d.imag).max() > 1e-8:
            raise ArithmeticError("non-real configuration probability")
        probs[s:s + chunk] = d.real
    return probs, configs


def coupling_location(m: int, a: float) -> tuple:
    """a-face (rho_m + 1)(1, 1) on the diagonal at the rough-smooth boundary."""
    K = derived_constants(a)
    rho = 4 * math.floor(m * (1 + K.xi))
    return (rho + 1, rho + 1)


def coupling_tv(m: int, a: float, L: int = 2, location=None, cache: KernelCache | None = None) -> dict:
    """Exact total variation between the diamond and smooth-phase laws on one box."""
    if L != 2:
        raise ValueError("only L = 2 (4^6 configurations) is enumerated")
    if m > 16:
        raise ValueError("exact finite inverse limited to m <= 16")
    face = coupling_location(m, a) if location is None else tuple(location)
    whites = box_whites_L2(face)
    g = build_diamond(m, a)
    inv_az = KinvColumns(g.whites, g.blacks, a)
    cache = cache or KernelCache(a)
    p_az, _ = _config_probs(whites, inv_az, a)
    p_sm, _ = _config_probs(whites, lambda w, b: smooth_Kinv(w, b, a, cache), a)
    s_az, s_sm = p_az.sum(), p_sm.sum()
    if abs(s_az - 1) > 1e-8 or abs(s_sm - 1) > 1e-8:
        raise ArithmeticError(f"configuration laws not normalized: {s_az}, {s_sm}")
    # K^-1 has exponentially large entries far away; certify the local ones
    ident = max(abs(sum(kasteleyn_entry((w[0] + f[0], w[1] + f[1]), w, a, 1.0)
                        * inv_az(w, (w[0] + f[0], w[1] + f[1]))
                        for f in F_STEPS if (w[0] + f[0], w[1] + f[1]) in inv_az.bidx) - 1)
                for w in whites)
    return {"m": m, "a": a, "L": L, "face": list(face), "tv": 0.5 * float(np.abs(p_az - p_sm).sum()),
            "sum_az": float(s_az), "sum_sm": float(s_sm), "min_az": float(p_az.min()),
            "min_sm": float(p_sm.min()), "kinv_identity_error": float(ident)}


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def smooth_independence(separation: int, a: float, cache: KernelCache | None = None) -> float:
    """sum |p(s1, s2) - p(s1) p(s2)| for two L = 2 boxes on the diagonal in the smooth phase."""
    if separation <= 0 or separation % 2:
        raise ValueError("separation must be a positive even integer")
    cache = cache or KernelCache(a)
    inv = lambda w, b: smooth_Kinv(w, b, a, cache)  # noqa: E731
    w1 = box_whites_L2((1, 1))
    w2 = box_whites_L2((1 + separation, 1 + separation))
    if set(w1) & set(w2) or {(w[0] + f[0], w[1] + f[1]) for w in w1 for f in F_STEPS} & \
            {(w[0] + f[0], w[1] + f[1]) for w in w2 for f in F_STEPS}:
        raise ValueError("boxes overlap")
    p1, c1 = _config_probs(w1, inv, a)
    p2, c2 = _config_probs(w2, inv, a)
    i1, i2 = np.nonzero(p1 != 0)[0], np.nonzero(p2 != 0)[0]
    whites = w1 + w2
    R = len(whites)
    blacks = sorted({(w[0] + f[0], w[1] + f[1]) for w in whites for f in F_STEPS})
    bid = {b: t for t, b in enumerate(blacks)}
    G = np.array([[inv(w, b) for b in blacks] for w in whites])
    Kb = np.array([[kasteleyn_entry((w[0] + f[0], w[1] + f[1]), w, a, 1.0) for f in F_STEPS] for w in whites])
    nbr = np.array([[bid[(w[0] + f[0], w[1] + f[1])] for f in F_STEPS] for w in whites])
    total = 0.0
    rows = np.arange(R)[None, :]
    for a1 in i1:
        S = np.hstack([np.repeat(c1[a1][None, :], len(i2), axis=0), c2[i2]])
        b = nbr[rows, S]
        kb = Kb[rows, S]
        Lm = np.transpose(G[:, b], (1, 2, 0)) * kb[:, :, None]
        joint = np.linalg.det(Lm).real
        total += float(np.abs(joint - p1[a1] * p2[i2]).sum())
    # configurations where either marginal vanishes have joint probability 0 too
    return total


# ------------------------------------------------------------ symmetry

def loop_symmetry(m: int, a: float, samples: int, face=None, seed: int = 0) -> dict:
    """Mean loop height at one smooth-region face; it should vanish by loop reversal."""
    from .heights import height_function, loop_height

    n = 4 * m
    face = (n + 1, n + 1) if face is None else tuple(face)
    vals = []
    for cov in sample_many(SamplerConfig(m, a, seed), samples):
        h = height_function(cov)
        vals.append(loop_height(decompose(cov, h))(*face))
    v = np.asarray(vals, dtype=float)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
    ks = stats.ks_2samp(v, -v)
    return {"m": m, "a": a, "face": list(face), "samples": samples, "mean": mean, "stderr": se,
            "within_3se": bool(abs(mean) <= 3 * se) if se > 0 else mean == 0,
            "flip_ks_pvalue": float(ks.pvalue)}
