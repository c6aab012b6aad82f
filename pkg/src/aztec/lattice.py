"""Two-periodic Aztec diamond graph, Kasteleyn matrix and brute-force oracles.

Coordinates follow the usual rotated picture of the Aztec diamond of order n:

    white  (x, y)  x odd in [1, 2n-1],  y even in [0, 2n]
    black  (x, y)  x even in [0, 2n],   y odd in [1, 2n-1]

and every edge joins a white w to a black w + d with d one of

    e1 = (1, 1),  e2 = (-1, 1),  -e1,  -e2     (direction codes 0, 1, 2, 3).

Faces are indexed by their centers (cx, cy) with cx + cy even.  Each edge
borders exactly one odd-odd face; those faces carry the weights (a-faces when
cx + cy = 2 mod 4, b-faces when cx + cy = 0 mod 4).  Even-even faces are
"plain".

A covering is stored as an int8 array ``dirs`` of shape (n, n + 1) where
``dirs[p, q]`` is the direction code of the dimer at the white vertex
(2p + 1, 2q).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

DIRS = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=np.int64)
DENSE_CAP = 5000


def vertex_parity(x, y):
    """Class index i with (x + y) mod 4 = 2i + 1."""
    return ((np.asarray(x) + np.asarray(y)) % 4 - 1) // 2


def face_kind(cx: int, cy: int) -> str:
    if (cx + cy) % 2:
        raise ValueError(f"({cx}, {cy}) is not a face center")
    if cx % 2 == 0:
        return "plain"
    return "a" if (cx + cy) % 4 == 2 else "b"


def white_face(x: int, y: int):
    """The odd-odd faces touching a vertex, returned as (a_face, b_face)."""
    if x % 2:  # white: odd-odd neighbours above and below
        f1, f2 = (x, y - 1), (x, y + 1)
    else:
        f1, f2 = (x - 1, y), (x + 1, y)
    return (f1, f2) if face_kind(*f1) == "a" else (f2, f1)


def kasteleyn_entry(black, white, a: float, b: float = 1.0) -> complex:
    """K(black, white) for the two-periodic sign convention; 0 off the graph."""
    dx, dy = white[0] - black[0], white[1] - black[1]
    j = int(vertex_parity(*black))
    if (dx, dy) == (1, 1):
        return a * (1 - j) + b * j
    if (dx, dy) == (-1, 1):
        return (a * j + b * (1 - j)) * 1j
    if (dx, dy) == (-1, -1):
        return a * j + b * (1 - j)
    if (dx, dy) == (1, -1):
        return (a * (1 - j) + b * j) * 1j
    return 0.0


@dataclass(frozen=True)
class DiamondGraph:
    n: int
    a: float
    b: float = 1.0
    whites: np.ndarray = field(repr=False, default=None)
    blacks: np.ndarray = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.n // 4

    @cached_property
    def white_index(self) -> dict:
        return {(int(x), int(y)): i for i, (x, y) in enumerate(self.whites)}

    @cached_property
    def black_index(self) -> dict:
        return {(int(x), int(y)): i for i, (x, y) in enumerate(self.blacks)}

    @cached_property
    def edges(self) -> np.ndarray:
        """Rows (white index, black index, direction code)."""
        out = []
        for wi, (x, y) in enumerate(self.whites):
            for d, (dx, dy) in enumerate(DIRS):
                bi = self.black_index.get((int(x + dx), int(y + dy)))
                if bi is not None:
                    out.append((wi, bi, d))
        return np.array(out, dtype=np.int64)

    def edge_weight(self, white, black) -> float:
        return abs(kasteleyn_entry(black, white, self.a, self.b))

    def edge_weight_by_face(self, white, black) -> float:
        """Weight read off the face rule: a iff the edge borders an a-face."""
        (wx, wy), (bx, by) = white, black
        # the two faces bordering the edge are the other two corners of its unit square
        faces = [(bx, wy), (wx, by)]
        kinds = {face_kind(*f) for f in faces}
        return self.a if "a" in kinds else self.b

    @property
    def faces(self):
        """All face centers touching at least one edge, with their kind."""
        out = []
        for cx in range(0, 2 * self.n + 1):
            for cy in range(0, 2 * self.n + 1):
                if (cx + cy) % 2 == 0:
                    out.append((cx, cy, face_kind(cx, cy)))
        return out

    def is_interior_face(self, cx: int, cy: int) -> bool:
        return 1 <= cx <= 2 * self.n - 1 and 1 <= cy <= 2 * self.n - 1

    def a_faces(self) -> np.ndarray:
        n = self.n
        c = np.arange(1, 2 * n, 2)
        X, Y = np.meshgrid(c, c, indexing="ij")
        mask = (X + Y) % 4 == 2
        return np.stack([X[mask], Y[mask]], axis=1)


def aztec_graph(n: int, a: float, b: float = 1.0) -> DiamondGraph:
    """Aztec diamond graph of any order n with two-periodic face weights."""
    if n < 1:
        raise ValueError("order must be positive")
    if a <= 0 or b <= 0:
        raise ValueError("weights must be positive")
    # raster order: y first, then x
    wy, wx = np.meshgrid(np.arange(0, 2 * n + 1, 2), np.arange(1, 2 * n, 2), indexing="ij")
    whites = np.stack([wx.ravel(), wy.ravel()], axis=1)
    by, bx = np.meshgrid(np.arange(1, 2 * n, 2), np.arange(0, 2 * n + 1, 2), indexing="ij")
    blacks = np.stack([bx.ravel(), by.ravel()], axis=1)
    return DiamondGraph(n=n, a=float(a), b=float(b), whites=whites, blacks=blacks)


def build_diamond(m: int, a: float, b: float = 1.0) -> DiamondGraph:
    """The two-periodic Aztec diamond D_m of order n = 4m."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a!r}")
    return aztec_graph(4 * int(m), a, b)


def white_id(n: int, x, y):
    """Raster index of the white vertex (x, y)."""
    return (np.asarray(y) // 2) * n + (np.asarray(x) - 1) // 2


def black_id(n: int, x, y):
    return ((np.asarray(y) - 1) // 2) * (n + 1) + np.asarray(x) // 2


def kasteleyn_sparse(whites, blacks, a: float, b: float = 1.0) -> sp.csc_matrix:
    """Kasteleyn matrix on any vertex sets using the two-periodic signs."""
    bidx = {(int(x), int(y)): i for i, (x, y) in enumerate(blacks)}
    rows, cols, vals = [], [], []
    for wi, (x, y) in enumerate(whites):
        for dx, dy in DIRS:
            key = (int(x + dx), int(y + dy))
            bi = bidx.get(key)
            if bi is not None:
                rows.append(bi)
                cols.append(wi)
                vals.append(kasteleyn_entry(key, (int(x), int(y)), a, b))
    shape = (len(blacks), len(whites))
    return sp.csc_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=shape)


def kasteleyn_matrix(g: DiamondGraph, dense: bool = True):
    """Rows are black vertices, columns white vertices, both in raster order."""
    K = kasteleyn_sparse(g.whites, g.blacks, g.a, g.b)
    return K.toarray() if dense else K


def inverse_residual(K, Kinv) -> float:
    """max_j |K Kinv e_j - e_j| / max(1, |Kinv e_j|), all max-norms."""
    R = np.abs(K @ Kinv - np.eye(K.shape[0])).max(axis=0)
    return float((R / np.maximum(1.0, np.abs(Kinv).max(axis=0))).max())


def exact_inverse_kasteleyn(g: DiamondGraph, cap: int = DENSE_CAP, tol: float = 1e-8) -> np.ndarray:
    """Dense inverse, rows white and columns black; the residual is checked.

    Entries between opposite frozen corners grow exponentially with n, so
    the residual of each column is measured relative to that column's size.
    """
    size = len(g.whites)
    if size > cap:
        raise ValueError(f"{size} vertices per colour exceeds the dense cap {cap}")
    K = kasteleyn_matrix(g)
    Kinv = np.linalg.inv(K)
    resid = inverse_residual(K, Kinv)
    if not np.isfinite(resid) or resid > tol:
        raise np.linalg.LinAlgError(f"inverse residual {resid:.3e}")
    return Kinv


class KinvColumns:
    """Columns of K^-1 on demand through one sparse LU factorisation."""

    def __init__(self, whites, blacks, a: float, b: float = 1.0):
        from scipy.sparse.linalg import splu

        self.whites = np.asarray(whites)
        self.blacks = np.asarray(blacks)
        self.K = kasteleyn_sparse(self.whites, self.blacks, a, b)
        self.lu = splu(self.K.tocsc())
        self.widx = {(int(x), int(y)): i for i, (x, y) in enumerate(self.whites)}
        self.bidx = {(int(x), int(y)): i for i, (x, y) in enumerate(self.blacks)}
        self._cache = {}

    def column(self, black) -> np.ndarray:
        bi = self.bidx[(int(black[0]), int(black[1]))]
        if bi not in self._cache:
            rhs = np.zeros(len(self.blacks), dtype=complex)
            rhs[bi] = 1.0
            # K^-1 e_b is the column of K^-1 (rows white) at black b
            self._cache[bi] = self.lu.solve(rhs)
        return self._cache[bi]

    def __call__(self, white, black) -> complex:
        return self.column(black)[self.widx[(int(white[0]), int(white[1]))]]


def local_statistics(g: DiamondGraph, Kinv, edges) -> float:
    """Probability that all (black, white) edges are covered.

    ``Kinv`` is either a dense white-by-black matrix or a callable
    ``Kinv(white, black)``.
    """
    edges = [(tuple(map(int, bl)), tuple(map(int, wh))) for bl, wh in edges]
    if len(set(edges)) != len(edges):
        raise ValueError("duplicate edges")
    if not edges:
        return 1.0
    bl = [e[0] for e in edges]
    wh = [e[1] for e in edges]
    if len(set(bl)) < len(bl) or len(set(wh)) < len(wh):
        return 0.0
    for b_, w_ in edges:
        if kasteleyn_entry(b_, w_, g.a, g.b) == 0:
            raise ValueError(f"{(b_, w_)} is not an edge")
    if callable(Kinv):
        inv = lambda w_, b_: Kinv(w_, b_)  # noqa: E731
    else:
        inv = lambda w_, b_: Kinv[g.white_index[w_], g.black_index[b_]]  # noqa: E731
    k = len(edges)
    L = np.empty((k, k), dtype=complex)
    for i in range(k):
        kb = kasteleyn_entry(bl[i], wh[i], g.a, g.b)
        for j in range(k):
            L[i, j] = kb * inv(wh[j], bl[i])
    val = np.linalg.det(L)
    if abs(val.imag) > 1e-8:
        raise ArithmeticError(f"non-real probability {val}")
    return float(val.real)


@dataclass
class Covering:
    n: int
    dirs: np.ndarray
    seed: int | None = None

    def dimers(self):
        """List of (black, white) coordinate pairs."""
        out = []
        for p in range(self.n):
            for q in range(self.n + 1):
                w = (2 * p + 1, 2 * q)
                d = DIRS[self.dirs[p, q]]
                out.append(((w[0] + int(d[0]), w[1] + int(d[1])), w))
        return out

    def blacks_hit(self) -> np.ndarray:
        p, q = np.meshgrid(np.arange(self.n), np.arange(self.n + 1), indexing="ij")
        d = DIRS[self.dirs]
        bx = 2 * p + 1 + d[..., 0]
        by = 2 * q + d[..., 1]
        return np.stack([bx, by], axis=-1)

    def is_perfect_matching(self) -> bool:
        n = self.n
        B = self.blacks_hit().reshape(-1, 2)
        ok = (B[:, 0] >= 0) & (B[:, 0] <= 2 * n) & (B[:, 1] >= 1) & (B[:, 1] <= 2 * n - 1)
        if not ok.all():
            return False
        ids = black_id(n, B[:, 0], B[:, 1])
        return np.unique(ids).size == n * (n + 1)

    def weight(self, a: float, b: float = 1.0) -> float:
        return float(np.prod(dimer_weights(self.n, self.dirs, a, b)))

    def key(self) -> bytes:
        return np.ascontiguousarray(self.dirs, dtype=np.int8).tobytes()


def dimer_weights(n: int, dirs: np.ndarray, a: float, b: float = 1.0) -> np.ndarray:
    """Edge weight of the dimer at every white vertex."""
    p, q = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    wx, wy = 2 * p + 1, 2 * q
    d = DIRS[dirs]
    # the odd-odd face of an edge (w, w+d) is (w_x, w_y + d_y)
    fy = wy + d[..., 1]
    is_a = (wx + fy) % 4 == 2
    return np.where(is_a, a, b)


def is_a_edge(n: int, dirs: np.ndarray) -> np.ndarray:
    p, q = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    fy = 2 * q + DIRS[dirs][..., 1]
    return (2 * p + 1 + fy) % 4 == 2


def enumerate_coverings(g: DiamondGraph, max_n: int = 6):
    """All coverings with their weights, in a deterministic order."""
    n = g.n
    if n > max_n:
        raise ValueError(f"enumeration limited to n <= {max_n}")
    used = np.zeros((2 * n + 1, 2 * n + 1), dtype=bool)
    dirs = np.zeros((n, n + 1), dtype=np.int8)
    order = [(p, q) for q in range(n + 1) for p in range(n)]  # raster
    out = []

    def row_done(q):
        # blacks at y = 2q - 1 can no longer be reached once white row q is set
        y = 2 * q - 1
        if y < 1:
            return True
        return bool(used[0 : 2 * n + 1 : 2, y].all())

    def rec(k):
        if k == len(order):
            c = Covering(n, dirs.copy())
            out.append((c, c.weight(g.a, g.b)))
            return
        p, q = order[k]
        x, y = 2 * p + 1, 2 * q
        for d in range(4):
            bx, by = x + DIRS[d, 0], y + DIRS[d, 1]
            if 0 <= bx <= 2 * n and 1 <= by <= 2 * n - 1 and not used[bx, by]:
                used[bx, by] = True
                dirs[p, q] = d
                if p < n - 1 or row_done(q):
                    rec(k + 1)
                used[bx, by] = False

    rec(0)
    return out


def partition_function_transfer(g: DiamondGraph) -> float:
    """Weighted number of coverings by a row-by-row transfer matrix."""
    n, a, b = g.n, g.a, g.b
    from itertools import product

    state = {0: 1.0}  # bitmask of blacks in the row below already covered
    full = (1 << (n + 1)) - 1
    for q in range(n + 1):
        y = 2 * q
        new = {}
        for mask, z in state.items():
            for choice in product(range(4), repeat=n):
                below = 0
                above = 0
                w = z
                ok = True
                for p, d in enumerate(choice):
                    bx, by = 2 * p + 1 + DIRS[d, 0], y + DIRS[d, 1]
                    if by < 1 or by > 2 * n - 1:
                        ok = False
                        break
                    bit = 1 << (bx // 2)
                    if by < y:
                        if (below | mask) & bit:
                            ok = False
                            break
                        below |= bit
                    else:
                        if above & bit:
                            ok = False
                            break
                        above |= bit
                    w *= abs(kasteleyn_entry((bx, by), (2 * p + 1, y), a, b))
                if not ok:
                    continue
                if q > 0 and (below | mask) != full:
                    continue
                new[above] = new.get(above, 0.0) + w
        state = new
    return state.get(0, 0.0)
