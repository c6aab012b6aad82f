"""Finite boxes L_R, their gauge-equivalent weightings and the spanning-tree bijection.

Edge weights are kept as integer exponents of ``a`` so gauge identities can
be checked exactly.  Whites split into class 1 (x + y = 3 mod 4, all interior)
and class 0 (x + y = 1 mod 4, including every boundary white).  A covering
of the box is the same thing as a pair of directed spanning trees:

* class-1 whites send an arrow w -> w + 2 s e_i across their matched black;
  leaving the box means joining the wired root;
* class-0 whites do the same and form a tree rooted at the corner point
  ``dual_root(R)``.

Either tree determines the other, because every black is crossed by exactly
one arrow of one of the two trees.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numba
import numpy as np

from .kernels import KernelCache, smooth_Kinv
from .lattice import kasteleyn_entry

VARIANTS = ("plain", "w", "f")
E = ((1, 1), (-1, 1))  # e1, e2
# arrow directions in walk order (e1, e2, -e1, -e2) as (axis i, sign exponent k)
STEPS = ((0, 0), (1, 0), (0, 1), (1, 1))
WIRED = None


def _vec(i: int, k: int, scale: int = 1):
    s = scale * (1 - 2 * k)
    return (s * E[i][0], s * E[i][1])


def white_class(x: int, y: int) -> int:
    return ((x + y) % 4 - 1) // 2


def edge_exponent(variant: str, j: int, k: int) -> int:
    """Exponent of a on the edge (w, w + (-1)^k e_i), w of class j."""
    if variant == "plain":
        return (1 - j) * (1 - k) + k * j
    if variant == "w":
        return 2 * k * j
    if variant == "f":
        return 2 * (1 - k) * (1 - j)
    raise ValueError(f"unknown variant {variant!r}")


def box_whites(R: int) -> list:
    out = [(2 * i + 1 - 2 * R, 2 * j + 2 - 2 * R) for i in range(2 * R - 1) for j in range(2 * R - 1)]
    out += [(4 * i + 1 - 2 * R, -2 * R) for i in range(1, R)]
    out += [(-1 - 2 * R, 4 * j + 2 - 2 * R) for j in range(R)]
    out += [(4 * i + 1 - 2 * R, 2 * R) for i in range(R)]
    out += [(2 * R - 1, 4 * j + 2 - 2 * R) for j in range(R)]
    return out


def box_blacks(R: int) -> list:
    return [(2 * i - 2 * R, 2 * j + 1 - 2 * R) for i in range(2 * R) for j in range(2 * R)]


def dual_root(R: int) -> tuple:
    # the only point outside the box that a class-0 arrow can reach
    return (1 - 2 * R, -2 * R)


@dataclass(frozen=True)
class BoxGraph:
    R: int
    a: float
    variant: str
    whites: list = field(repr=False)
    blacks: list = field(repr=False)
    edges: list = field(repr=False)  # (white index, black index, axis i, k, exponent)

    def __post_init__(self):
        object.__setattr__(self, "_wi", {w: t for t, w in enumerate(self.whites)})
        object.__setattr__(self, "_bi", {b: t for t, b in enumerate(self.blacks)})

    def white_index(self, w) -> int:
        return self._wi[tuple(w)]

    def black_index(self, b) -> int:
        return self._bi[tuple(b)]

    def has_white(self, w) -> bool:
        return tuple(w) in self._wi

    def has_black(self, b) -> bool:
        return tuple(b) in self._bi

    def weight(self, e) -> float:
        return self.a ** e[4]

    def kasteleyn(self) -> np.ndarray:
        """Dense K with rows black, columns white; phases as in the two-periodic convention."""
        K = np.zeros((len(self.blacks), len(self.whites)), dtype=complex)
        for wi, bi, _, _, ex in self.edges:
            phase = kasteleyn_entry(self.blacks[bi], self.whites[wi], 1.0, 1.0)
            K[bi, wi] = phase * self.a**ex
        return K

    def faces(self):
        """Interior faces as (center, [w0, b0, w1, b1]) cycles of vertices."""
        es = {(self.whites[wi], self.blacks[bi]) for wi, bi, *_ in self.edges}
        out = []
        xs = [p[0] for p in self.whites + self.blacks]
        ys = [p[1] for p in self.whites + self.blacks]
        for cx in range(min(xs), max(xs) + 1):
            for cy in range(min(ys), max(ys) + 1):
                ring = [(cx + 1, cy), (cx, cy + 1), (cx - 1, cy), (cx, cy - 1)]
                if cx % 2 == 1:  # odd-odd center: blacks left/right, whites up/down
                    ring = ring[1:] + ring[:1]
                if not (cx % 2 == cy % 2):
                    continue
                w0, b0, w1, b1 = ring
                if all((w, b) in es for w, b in ((w0, b0), (w1, b0), (w1, b1), (w0, b1))):
                    out.append(((cx, cy), ring))
        return out

    def face_exponent(self, ring) -> int:
        """Exponent of the alternating weight product around one face."""
        ex = {(self.whites[wi], self.blacks[bi]): e for wi, bi, _, _, e in self.edges}
        w0, b0, w1, b1 = ring
        return ex[(w0, b0)] - ex[(w1, b0)] + ex[(w1, b1)] - ex[(w0, b1)]


def build_box(R: int, a: float, variant: str = "plain") -> BoxGraph:
    if int(R) != R or R <= 1:
        raise ValueError("R must be an integer > 1")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    whites, blacks = box_whites(R), box_blacks(R)
    bidx = {b: t for t, b in enumerate(blacks)}
    edges = []
    for wi, w in enumerate(whites):
        j = white_class(*w)
        for i, k in STEPS:
            d = _vec(i, k)
            b = (w[0] + d[0], w[1] + d[1])
            if b in bidx:
                edges.append((wi, bidx[b], i, k, edge_exponent(variant, j, k)))
    return BoxGraph(int(R), float(a), variant, whites, blacks, edges)


def gauge_multipliers(R: int, target: str) -> tuple[dict, dict]:
    """Integer exponents of a multiplying each white and black vertex of the plain box."""
    if target not in ("w", "f"):
        raise ValueError("target must be 'w' or 'f'")
    s = 1 if target == "w" else -1
    wm = {w: s * (white_class(*w) + (w[1] - 2 + 2 * R) // 2) for w in box_whites(R)}
    bm = {b: -s * ((b[1] - 1 + 2 * R) // 2) for b in box_blacks(R)}
    return wm, bm


def check_gauge(R: int, target: str) -> int:
    """Number of edges whose gauged plain exponent differs from the target exponent."""
    plain, tgt = build_box(R, 1.0, "plain"), build_box(R, 1.0, target)
    wm, bm = gauge_multipliers(R, target)
    bad = 0
    for e, f in zip(plain.edges, tgt.edges):
        w, b = plain.whites[e[0]], plain.blacks[e[1]]
        bad += int(e[4] + wm[w] + bm[b] != f[4])
    return bad


# ---------------------------------------------------------------- trees

@dataclass
class DirectedForest:
    """Arrow targets of a directed spanning tree.

    ``parent[v]`` is the point v + 2 s e_i the arrow at v points to.  For the
    wired class-1 tree any target outside the vertex set is the wired root;
    for the class-0 tree the only allowed outside target is ``root``.
    """

    R: int
    cls: int
    parent: dict

    @property
    def root(self):
        return WIRED if self.cls == 1 else dual_root(self.R)

    def is_root(self, u) -> bool:
        if u in self.parent:
            return False
        return self.cls == 1 or u == self.root

    def is_arborescence(self) -> bool:
        for v in self.parent:
            seen = set()
            u = v
            while u in self.parent:
                if u in seen:
                    return False
                seen.add(u)
                u = self.parent[u]
            if not self.is_root(u):
                return False
        return True

    def weight_exponent(self, variant: str = "w") -> int:
        tot = 0
        for v, u in self.parent.items():
            k = 0 if (u[1] > v[1]) else 1  # e1 and e2 both raise y
            tot += edge_exponent(variant, self.cls, k)
        return tot

    def key(self) -> tuple:
        return tuple(sorted(self.parent.items()))

    def to_json(self) -> dict:
        return {"R": self.R, "class": self.cls,
                "root": "wired" if self.cls == 1 else list(self.root),
                "parent": {f"{v[0]},{v[1]}": list(p) for v, p in sorted(self.parent.items())}}


def tree_graph(box: BoxGraph, cls: int):
    """Vertices of one class, out-neighbours and arrow weights.

    nbr[v, d] is the target index, len(verts) for the root, or -1 when the
    arrow does not exist; directions d follow STEPS.
    """
    verts = [w for w in box.whites if white_class(*w) == cls]
    idx = {v: t for t, v in enumerate(verts)}
    root = len(verts)
    nbr = -np.ones((len(verts), 4), dtype=np.int64)
    wts = np.zeros((len(verts), 4))
    for t, v in enumerate(verts):
        for d, (i, k) in enumerate(STEPS):
            s1, s2 = _vec(i, k), _vec(i, k, 2)
            if not box.has_black((v[0] + s1[0], v[1] + s1[1])):
                continue
            u = (v[0] + s2[0], v[1] + s2[1])
            if u in idx:
                nbr[t, d] = idx[u]
            elif cls == 1 or u == dual_root(box.R):
                nbr[t, d] = root
            else:
                continue
            wts[t, d] = box.a ** edge_exponent(box.variant, cls, k)
    return verts, nbr, wts


@numba.njit(cache=True)
def _wilson(nbr, cum, order, u01, cap):
    """Loop-erased walks by cycle popping; returns (direction per vertex, steps or -1)."""
    n = nbr.shape[0]
    in_tree = np.zeros(n + 1, dtype=np.bool_)
    in_tree[n] = True
    nxt = -np.ones(n, dtype=np.int64)
    nd = -np.ones(n, dtype=np.int64)
    steps = 0
    for v0 in order:
        u = v0
        while not in_tree[u]:
            if steps >= u01.shape[0] or steps >= cap:
                return nd, -1
            x = u01[steps]
            steps += 1
            d = 0
            while d < 3 and cum[u, d] <= x:
                d += 1
            nd[u] = d
            nxt[u] = nbr[u, d]
            u = nxt[u]
        u = v0
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u]
    return nd, steps


def wilson_sample(R: int, a: float, seed: int = 0, variant: str = "w", order=None,
                  cap: int = 10**9, return_steps: bool = False):
    """Random arborescence with weight proportional to the product of arrow weights.

    For variant "w" this is the wired class-1 tree with step weights
    (1, 1, a^2, a^2) in directions (e1, e2, -e1, -e2); for "f" it is the
    class-0 tree rooted at the corner.
    """
    if variant not in ("w", "f"):
        raise ValueError("trees are sampled on the 'w' or 'f' weighting")
    cls = 1 if variant == "w" else 0
    box = _cached_box(R, float(a), variant)
    verts, nbr, cum = _walk_table(R, float(a), variant)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    order = np.arange(len(verts)) if order is None else np.asarray(order, dtype=np.int64)
    u01 = rng.random(max(4096, 64 * len(verts)))
    while True:
        nd, steps = _wilson(nbr, cum, order, u01, cap)
        if steps >= 0:
            break
        if u01.size >= cap:
            raise RuntimeError(f"Wilson walks exceeded {cap} steps")
        u01 = np.concatenate([u01, rng.random(u01.size)])  # rerun from scratch with a longer stream
    parent = {}
    for t, v in enumerate(verts):
        s2 = _vec(*STEPS[nd[t]], 2)
        parent[v] = (v[0] + s2[0], v[1] + s2[1])
    f = DirectedForest(box.R, cls, parent)
    return (f, steps) if return_steps else f


_BOXES: dict = {}


def _cached_box(R, a, variant):
    key = (R, a, variant)
    if key not in _BOXES:
        _BOXES[key] = build_box(R, a, variant)
    return _BOXES[key]


_TABLES: dict = {}


def _walk_table(R, a, variant):
    key = (R, a, variant)
    if key not in _TABLES:
        cls = 1 if variant == "w" else 0
        verts, nbr, wts = tree_graph(_cached_box(R, a, variant), cls)
        cum = np.cumsum(wts, axis=1) / wts.sum(axis=1, keepdims=True)
        _TABLES[key] = (verts, nbr, cum)
    return _TABLES[key]


def tree_to_dimers(forest: DirectedForest) -> dict:
    """Covering (white -> black map) of the box determined by one tree."""
    if not forest.is_arborescence():
        raise ValueError("forest is not a spanning arborescence")
    box = _cached_box(forest.R, 1.0, "plain")
    match = {v: _mid(v, u) for v, u in forest.parent.items()}
    used = set(match.values())
    if len(used) != len(match):
        raise ValueError("two arrows cross the same black")
    other = other_tree(forest.R, 1 - forest.cls, used)
    match.update({v: _mid(v, u) for v, u in other.parent.items()})
    if len(set(match.values())) != len(box.blacks) or len(match) != len(box.whites):
        raise ValueError("trees do not give a perfect matching")
    return match


def _mid(v, u):
    return ((v[0] + u[0]) // 2, (v[1] + u[1]) // 2)


def other_tree(R: int, cls: int, used: set) -> DirectedForest:
    """Rebuild the class-``cls`` tree from the blacks used by the other class.

    Every unused black carries one arrow of this class; breadth-first search
    from the root orients them.
    """
    box = _cached_box(R, 1.0, "plain")
    verts = [w for w in box.whites if white_class(*w) == cls]
    vset = set(verts)
    ROOT = "root"
    adj = {v: [] for v in verts}
    adj[ROOT] = []
    for b in box.blacks:
        if b in used:
            continue
        if white_class(b[0] - 1, b[1] - 1) == cls:
            cand = [(b[0] - 1, b[1] - 1), (b[0] + 1, b[1] + 1)]
        else:
            cand = [(b[0] + 1, b[1] - 1), (b[0] - 1, b[1] + 1)]
        ends = []
        for c in cand:
            if c in vset:
                ends.append(c)
            elif cls == 1 or c == dual_root(R):
                ends.append(ROOT)
            else:
                raise ValueError(f"black {b} is unused but its arrow leaves the box")
        u, v = ends
        adj[u].append((v, b))
        adj[v].append((u, b))
    parent = {}
    seen = {ROOT}
    q = deque([ROOT])
    while q:
        u = q.popleft()
        for v, b in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = (2 * b[0] - v[0], 2 * b[1] - v[1])
                q.append(v)
    if len(parent) != len(verts):
        raise ValueError("unused blacks do not connect every vertex to the root")
    return DirectedForest(R, cls, parent)


def dimers_to_trees(match: dict, R: int):
    """(class-1 tree, class-0 tree) of a covering given as a white -> black map."""
    trees = []
    for cls in (1, 0):
        verts = [w for w in box_whites(R) if white_class(*w) == cls]
        parent = {v: (2 * match[v][0] - v[0], 2 * match[v][1] - v[1]) for v in verts}
        f = DirectedForest(R, cls, parent)
        if not f.is_arborescence():
            raise ValueError(f"class-{cls} arrows do not form an arborescence")
        trees.append(f)
    return tuple(trees)


def matching_exponent(match: dict, variant: str) -> int:
    tot = 0
    for w, b in match.items():
        k = 0 if b[1] > w[1] else 1
        tot += edge_exponent(variant, white_class(*w), k)
    return tot


def enumerate_matchings(box: BoxGraph) -> list:
    """All perfect matchings of a small box as white -> black maps."""
    nb = {}
    for wi, bi, *_ in box.edges:
        nb.setdefault(box.whites[wi], []).append(box.blacks[bi])
    order = sorted(box.whites, key=lambda w: len(nb.get(w, [])))
    out, cur, used = [], {}, set()

    def rec(t):
        if t == len(order):
            out.append(dict(cur))
            return
        w = order[t]
        for b in nb.get(w, []):
            if b not in used:
                used.add(b)
                cur[w] = b
                rec(t + 1)
                used.discard(b)
                del cur[w]

    rec(0)
    return out


def enumerate_arborescences(R: int, variant: str = "w") -> list:
    """Every spanning arborescence of the primal tree graph (small R only)."""
    import itertools

    cls = 1 if variant == "w" else 0
    verts, nbr, _ = tree_graph(_cached_box(R, 1.0, variant), cls)
    choices = [[d for d in range(4) if nbr[t, d] >= 0] for t in range(len(verts))]
    out = []
    for combo in itertools.product(*choices):
        parent = {}
        for t, d in enumerate(combo):
            s2 = _vec(*STEPS[d], 2)
            parent[verts[t]] = (verts[t][0] + s2[0], verts[t][1] + s2[1])
        f = DirectedForest(R, cls, parent)
        if f.is_arborescence():
            out.append(f)
    return out


def matrix_tree_exponents(R: int, a: float, variant: str = "w") -> float:
    """Total arborescence weight by the directed matrix-tree theorem."""
    cls = 1 if variant == "w" else 0
    verts, nbr, wts = tree_graph(build_box(R, a, variant), cls)
    n = len(verts)
    Lap = np.diag(wts.sum(axis=1))
    for t in range(n):
        for d in range(4):
            if 0 <= nbr[t, d] < n:
                Lap[t, nbr[t, d]] -= wts[t, d]
    return float(np.linalg.det(Lap))


# ------------------------------------------------------ box K^-1 vs plane

DEFAULT_OFFSETS = (((1, 0), (0, 1)), ((1, 0), (2, -1)), ((-1, 2), (2, 1)), ((1, 2), (-2, -1)))


def box_Kinv(R: int, a: float):
    box = build_box(R, a, "plain")
    K = box.kasteleyn()
    Kinv = np.linalg.inv(K)  # rows white, columns black
    resid = np.abs(K @ Kinv - np.eye(K.shape[0])).max()
    return box, Kinv, resid


def box_Kinv_convergence(Rs, a: float, offsets=DEFAULT_OFFSETS, cache: KernelCache | None = None):
    """Rows (R, max discrepancy, residual) of |K_R^-1(x, y) - plane K^-1(x, y)|."""
    cache = cache or KernelCache(a)
    plane = [smooth_Kinv(x, y, a, cache) for x, y in offsets]
    rows = []
    for R in Rs:
        box, Kinv, resid = box_Kinv(R, a)
        d = max(abs(Kinv[box.white_index(x), box.black_index(y)] - p) for (x, y), p in zip(offsets, plane))
        rows.append({"R": int(R), "discrepancy": float(d), "residual": float(resid)})
    return rows


# ------------------------------------------------------ forest statistics

def _node(v):
    """The b-face a vertex is squished into."""
    x, y = v
    if x % 2 == 1:  # white
        return (x, y + 1) if (x + y + 1) % 4 == 0 else (x, y - 1)
    return (x + 1, y) if (x + 1 + y) % 4 == 0 else (x - 1, y)


def a_dimer_components(match: dict):
    """Connected components of a-dimers once every b-face is contracted to a point."""
    parent = {}

    def find(u):
        while parent.setdefault(u, u) != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    dimers = []
    for w, b in match.items():
        k = 0 if b[1] > w[1] else 1
        if edge_exponent("plain", white_class(*w), k) == 1:
            n1, n2 = _node(w), _node(b)
            dimers.append((w, b, n1, n2))
            parent[find(n1)] = find(n2)
    comps = {}
    for w, b, n1, n2 in dimers:
        comps.setdefault(find(n1), []).append((w, b))
    return list(comps.values())


def forest_statistics(n_samples: int, R: int, a: float, seed: int = 0) -> dict:
    """Exploratory statistics of the covering induced by wired Wilson trees.

    Only the inner half-window |x|, |y| <= R is inspected.  A component
    "spans" when its dimers reach both the left and right (or bottom and top)
    sides of that window; it is "closed" when it avoids the outer box edge.
    """
    span = closed_only = single = 0
    steps = []
    for s in range(n_samples):
        f, st = wilson_sample(R, a, seed + s, "w", return_steps=True)
        steps.append(st)
        single += int(f.is_arborescence())
        match = tree_to_dimers(f)
        any_span, all_closed = False, True
        for comp in a_dimer_components(match):
            pts = np.array([p for d in comp for p in d])
            inner = pts[(np.abs(pts[:, 0]) <= R) & (np.abs(pts[:, 1]) <= R)]
            if inner.size == 0:
                continue
            wide = inner[:, 0].min() <= 1 - R and inner[:, 0].max() >= R - 1
            tall = inner[:, 1].min() <= 1 - R and inner[:, 1].max() >= R - 1
            any_span |= bool(wide or tall)
            if np.abs(pts).max() >= 2 * R - 1:
                all_closed = False
        span += int(any_span)
        closed_only += int(all_closed)
    return {"R": R, "a": a, "samples": n_samples, "spanning_frequency": span / n_samples,
            "closed_only_frequency": closed_only / n_samples,
            "single_tree_frequency": single / n_samples, "mean_walk_steps": float(np.mean(steps))}
