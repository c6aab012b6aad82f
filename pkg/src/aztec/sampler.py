"""Exact Boltzmann sampling of Aztec diamond coverings by weighted domino shuffling.

Edges are grouped by the odd-odd face (cell) they border.  Cell (p, q) of the
order-k diamond is the 2x2 block ``A[2p:2p+2, 2q:2q+2]`` of a (2k, 2k) array,
one entry per edge:

    (0, 1) NW   (1, 1) NE          NW: left black - top white
    (0, 0) SW   (1, 0) SE          SE: right black - bottom white

Urban renewal on every cell maps weights of order k to order k - 1: swap
opposite edges, divide by ad + bc, and keep the inner (2k-2, 2k-2) array.
Sampling goes the other way.  The order-(k-1) matching sits one entry inside
the order-k array; cells holding two of its dimers are emptied, lone dimers
slide to the opposite edge, and cells that received nothing get a parallel
pair, SW+NE with probability w_SW w_NE / (w_SW w_NE + w_SE w_NW).

All levels share one (2n, 2n) frame: level k lives at offset n - k.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .lattice import Covering, aztec_graph, enumerate_coverings

# block position -> (white row offset, direction code) for the final conversion
_POS_TO_DIR = {(0, 0): (0, 1), (1, 0): (0, 0), (0, 1): (1, 2), (1, 1): (1, 3)}


def cell_weights(n: int, a: float, b: float = 1.0) -> np.ndarray:
    """Order-n edge weights in block layout; a-cells are those with p + q even."""
    p, q = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    w = np.where((p + q) % 2 == 0, a, b).astype(float)
    return np.kron(w, np.ones((2, 2)))


def reduce_weights(W: np.ndarray) -> np.ndarray:
    """One urban-renewal step: order k weights -> order k - 1 weights."""
    k = W.shape[0] // 2
    w = W.reshape(k, 2, k, 2)
    sw, se, nw, ne = w[:, 0, :, 0], w[:, 1, :, 0], w[:, 0, :, 1], w[:, 1, :, 1]
    delta = sw * ne + se * nw
    out = np.empty_like(w)
    out[:, 0, :, 0] = ne / delta
    out[:, 1, :, 1] = sw / delta
    out[:, 1, :, 0] = nw / delta
    out[:, 0, :, 1] = se / delta
    inner = out.reshape(2 * k, 2 * k)[1:-1, 1:-1]
    return inner / inner.max()  # a global factor does not change the measure


def creation_probabilities_from(W: np.ndarray) -> list[np.ndarray]:
    """probs[k] is the (k, k) array of P(SW+NE) for the cells of order k."""
    n = W.shape[0] // 2
    probs = [None] * (n + 1)
    for k in range(n, 0, -1):
        w = W.reshape(k, 2, k, 2)
        x = w[:, 0, :, 0] * w[:, 1, :, 1]
        y = w[:, 1, :, 0] * w[:, 0, :, 1]
        probs[k] = x / (x + y)
        if k > 1:
            W = reduce_weights(W)
    return probs


@lru_cache(maxsize=8)
def creation_probabilities(n: int, a: float, b: float = 1.0):
    return tuple(creation_probabilities_from(cell_weights(n, a, b)))


@numba.njit(cache=True)
def _destroy_slide(F, n, k, todo):
    """Empty doubly occupied cells, slide lone dimers, list the empty cells."""
    o = n - k
    m = 0
    for p in range(k):
        r = o + 2 * p
        for q in range(k):
            c = o + 2 * q
            cnt = F[r, c] + F[r + 1, c] + F[r, c + 1] + F[r + 1, c + 1]
            if cnt == 0:
                todo[m, 0] = p
                todo[m, 1] = q
                m += 1
            elif cnt == 2:
                F[r, c] = 0
                F[r + 1, c] = 0
                F[r, c + 1] = 0
                F[r + 1, c + 1] = 0
            elif cnt == 1:
                # a lone dimer moves to the opposite edge of its cell
                t = F[r, c]
                F[r, c] = F[r + 1, c + 1]
                F[r + 1, c + 1] = t
                t = F[r + 1, c]
                F[r + 1, c] = F[r, c + 1]
                F[r, c + 1] = t
            else:
                return -1
    return m


@numba.njit(cache=True)
def _create(F, n, k, todo, m, probs, u):
    o = n - k
    for i in range(m):
        p = todo[i, 0]
        q = todo[i, 1]
        r = o + 2 * p
        c = o + 2 * q
        if u[i] < probs[p, q]:
            F[r, c] = 1
            F[r + 1, c + 1] = 1
        else:
            F[r + 1, c] = 1
            F[r, c + 1] = 1


def frame_to_dirs(F: np.ndarray) -> np.ndarray:
    """Convert a full order-n block array into the white-indexed direction array."""
    n = F.shape[0] // 2
    dirs = np.full((n, n + 1), -1, dtype=np.int8)
    for (sx, sy), (dq, code) in _POS_TO_DIR.items():
        p, q = np.nonzero(F[sx::2, sy::2])
        dirs[p, q + dq] = code
    if (dirs < 0).any():
        raise RuntimeError("shuffling produced an incomplete matching")
    return dirs


def dirs_to_frame(dirs: np.ndarray) -> np.ndarray:
    n = dirs.shape[0]
    F = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    for (sx, sy), (dq, code) in _POS_TO_DIR.items():
        sub = dirs[:, dq : dq + n] == code
        F[sx::2, sy::2] |= sub.astype(np.uint8)
    return F


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream for one sample: Philox keyed by seed XOR index."""
    key = (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=key))


def shuffle_frame(n: int, probs, rng: np.random.Generator) -> np.ndarray:
    F = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    todo = np.empty((n * n, 2), dtype=np.int64)
    for k in range(1, n + 1):
        m = _destroy_slide(F, n, k, todo)
        if m < 0:
            raise RuntimeError("cell with more than two dimers")
        _create(F, n, k, todo, m, probs[k], rng.random(m))
    return F


@dataclass(frozen=True)
class SamplerConfig:
    m: int
    a: float
    seed: int = 0
    method: str = "shuffle"
    b: float = 1.0

    @property
    def n(self) -> int:
        return 4 * self.m

    def validate(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.method not in ("shuffle", "enumerate"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "enumerate" and self.n > 6:
            raise ValueError("enumerate-and-sample needs n <= 6")


def sample_order(n: int, a: float, seed: int = 0, index: int = 0, b: float = 1.0) -> Covering:
    """One exact sample of the two-periodic diamond of any order n."""
    probs = creation_probabilities(n, float(a), float(b))
    F = shuffle_frame(n, probs, make_rng(seed, index))
    return Covering(n, frame_to_dirs(F), seed=seed)


@lru_cache(maxsize=4)
def _enumerated(n: int, a: float, b: float):
    cov = enumerate_coverings(aztec_graph(n, a, b))
    w = np.array([x[1] for x in cov])
    return [c.dirs for c, _ in cov], w / w.sum()


def sample(cfg: SamplerConfig, index: int = 0) -> Covering:
    cfg.validate()
    if cfg.method == "enumerate":
        dirs, p = _enumerated(cfg.n, float(cfg.a), float(cfg.b))
        i = make_rng(cfg.seed, index).choice(len(p), p=p)
        return Covering(cfg.n, dirs[i].copy(), seed=cfg.seed)
    return sample_order(cfg.n, cfg.a, cfg.seed, index, cfg.b)


def sample_many(cfg: SamplerConfig, count: int, start: int = 0):
    """Iterator over samples with indices start, ..., start + count - 1."""
    cfg.validate()
    probs = creation_probabilities(cfg.n, float(cfg.a), float(cfg.b))
    for i in range(start, start + count):
        if cfg.method == "enumerate":
            yield sample(cfg, i)
        else:
            F = shuffle_frame(cfg.n, probs, make_rng(cfg.seed, i))
            yield Covering(cfg.n, frame_to_dirs(F), seed=cfg.seed)


def edge_marginal_check(cfg: SamplerConfig, edge, n_samples: int):
    """Empirical frequency of one (black, white) edge against its exact probability."""
    from .lattice import exact_inverse_kasteleyn, local_statistics

    g = aztec_graph(cfg.n, cfg.a, cfg.b)
    exact = local_statistics(g, exact_inverse_kasteleyn(g), [edge])
    (bx, by), (wx, wy) = edge
    code = {(1, 1): 0, (-1, 1): 1, (-1, -1): 2, (1, -1): 3}[(bx - wx, by - wy)]
    p, q = (wx - 1) // 2, wy // 2
    hits = sum(int(c.dirs[p, q] == code) for c in sample_many(cfg, n_samples))
    freq = hits / n_samples
    var = exact * (1 - exact) / n_samples
    z = 0.0 if var == 0 else (freq - exact) / np.sqrt(var)
    return freq, exact, z
