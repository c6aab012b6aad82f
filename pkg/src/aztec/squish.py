"""Squishing and the decomposition of a-dimers into double edges, loops and paths.

Contracting every b-face to its center turns the a-dimers into arrows between
b-face centers ("nodes") that differ by (+-2, +-2).  The arrow of an a-dimer
runs from the node of its white vertex to the node of its black vertex.
Nodes outside [1, 2n-1]^2 hold a single boundary vertex; paths start and end
there.  Node directions are coded 0: (+2,+2), 1: (-2,+2), 2: (-2,-2), 3: (+2,-2).

Object kinds in ``Decomposition.kind``: 0 not an a-dimer, 1 double edge,
2 loop, 3 path.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

from .lattice import DIRS

NONE, DOUBLE, LOOP, PATH = 0, 1, 2, 3
HORIZONTAL, VERTICAL = 0, 1


@dataclass(frozen=True)
class SquishedConfig:
    n: int
    dirs: np.ndarray
    is_a: np.ndarray  # (n, n+1) bool, per white vertex
    tail: np.ndarray  # (n, n+1, 2) node of the white vertex
    head: np.ndarray  # (n, n+1, 2) node of the black partner

    @cached_property
    def incidence(self) -> np.ndarray:
        """Number of a-dimers touching each node, indexed by ((x+1)/2, (y+1)/2)."""
        cnt = np.zeros((self.n + 2, self.n + 2), dtype=np.int64)
        for ends in (self.tail[self.is_a], self.head[self.is_a]):
            np.add.at(cnt, ((ends[:, 0] + 1) // 2, (ends[:, 1] + 1) // 2), 1)
        return cnt

    @property
    def num_a_dimers(self) -> int:
        return int(self.is_a.sum())

    def arrows(self):
        """List of (tail node, head node) for every a-dimer."""
        t, h = self.tail[self.is_a], self.head[self.is_a]
        return [(tuple(map(int, a)), tuple(map(int, b))) for a, b in zip(t, h)]


def squish_dirs(n: int, dirs: np.ndarray) -> SquishedConfig:
    p, q = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    wx, wy = 2 * p + 1, 2 * q
    d = DIRS[dirs]
    bx, by = wx + d[..., 0], wy + d[..., 1]
    is_a = (wx + by) % 4 == 2
    # each vertex touches one b-face; for a white it is above or below it
    ty = np.where((wx + wy + 1) % 4 == 0, wy + 1, wy - 1)
    hx = np.where((bx + 1 + by) % 4 == 0, bx + 1, bx - 1)
    tail = np.stack([wx, ty], axis=-1)
    head = np.stack([hx, by], axis=-1)
    return SquishedConfig(n, dirs, is_a, tail, head)


def squish(cov) -> SquishedConfig:
    """Keep the a-dimers of a covering as white->black arrows between b-face nodes."""
    return squish_dirs(cov.n, cov.dirs)


@numba.njit(cache=True)
def _dir_code(dx, dy):
    if dx > 0:
        return 0 if dy > 0 else 3
    return 1 if dy > 0 else 2


@numba.njit(cache=True)
def _decompose(n, is_a, tail, head, H):
    """Core tracing.  Returns (kind, obj, members, starts, obj_kind, mirrors, nmir, err).

    err codes: 0 fine, 1 unpaired a-dimer at an interior node, 2 tied mirror,
    3 unterminated path, 4 loop shorter than four.
    """
    N = is_a.shape[0]
    S = n + 2
    out = -np.ones((S, S, 4), dtype=np.int64)
    inn = -np.ones((S, S, 4), dtype=np.int64)
    kind = np.zeros(N, dtype=np.int8)
    obj = -np.ones(N, dtype=np.int64)
    succ = -np.ones(N, dtype=np.int64)
    has_pred = np.zeros(N, dtype=np.bool_)
    members = np.empty(N, dtype=np.int64)
    starts = np.zeros(N + 1, dtype=np.int64)
    obj_kind = np.zeros(N, dtype=np.int8)
    mirrors = np.empty((S * S, 3), dtype=np.int64)
    nmir = 0
    for i in range(N):
        if not is_a[i]:
            continue
        c = _dir_code(head[i, 0] - tail[i, 0], head[i, 1] - tail[i, 1])
        out[(tail[i, 0] + 1) // 2, (tail[i, 1] + 1) // 2, c] = i
        inn[(head[i, 0] + 1) // 2, (head[i, 1] + 1) // 2, (c + 2) % 4] = i
    for u in range(S):
        for v in range(S):
            for c in range(4):
                if out[u, v, c] >= 0 and inn[u, v, c] >= 0:
                    kind[out[u, v, c]] = 1
                    kind[inn[u, v, c]] = 1
    ins = np.empty(4, dtype=np.int64)
    outs = np.empty(4, dtype=np.int64)
    for u in range(S):
        for v in range(S):
            ni = 0
            no = 0
            for c in range(4):
                j = inn[u, v, c]
                if j >= 0 and kind[j] != 1:
                    ins[ni] = c
                    ni += 1
                j = out[u, v, c]
                if j >= 0 and kind[j] != 1:
                    outs[no] = c
                    no += 1
            if ni == 0 and no == 0:
                continue
            external = u == 0 or v == 0 or u == S - 1 or v == S - 1
            if external:
                continue
            if ni == 1 and no == 1:
                succ[inn[u, v, ins[0]]] = out[u, v, outs[0]]
            elif ni == 2 and no == 2:
                x, y = 2 * u - 1, 2 * v - 1
                hw, he = H[x - 2, y], H[x + 2, y]
                hs, hn = H[x, y - 2], H[x, y + 2]
                if hw == he and hn == hs and hw < hn:
                    orient = 0  # mirror joins W and E: pair the two northern arrows
                elif hw == he and hn == hs and hn < hw:
                    orient = 1  # mirror joins N and S: pair the two western arrows
                else:
                    return kind, obj, members, starts, obj_kind, mirrors, nmir, 2
                mirrors[nmir, 0] = x
                mirrors[nmir, 1] = y
                mirrors[nmir, 2] = orient
                nmir += 1
                for a in range(2):
                    ca = ins[a]
                    for b in range(2):
                        cb = outs[b]
                        if orient == 0:
                            same = (ca <= 1) == (cb <= 1)
                        else:
                            same = (ca == 1 or ca == 2) == (cb == 1 or cb == 2)
                        if same:
                            succ[inn[u, v, ca]] = out[u, v, cb]
            else:
                return kind, obj, members, starts, obj_kind, mirrors, nmir, 1
    for i in range(N):
        if succ[i] >= 0:
            has_pred[succ[i]] = True
    nobj = 0
    pos = 0
    # paths, by start node in raster order (y, then x)
    for v in range(S):
        for u in range(S):
            if not (u == 0 or v == 0 or u == S - 1 or v == S - 1):
                continue
            for c in range(4):
                i = out[u, v, c]
                if i < 0 or kind[i] == 1:
                    continue
                starts[nobj] = pos
                steps = 0
                while i >= 0:
                    kind[i] = 3
                    obj[i] = nobj
                    members[pos] = i
                    pos += 1
                    steps += 1
                    if steps > N:
                        return kind, obj, members, starts, obj_kind, mirrors, nmir, 3
                    i = succ[i]
                hx, hy = (head[members[pos - 1], 0] + 1) // 2, (head[members[pos - 1], 1] + 1) // 2
                if not (hx == 0 or hy == 0 or hx == S - 1 or hy == S - 1):
                    return kind, obj, members, starts, obj_kind, mirrors, nmir, 3
                obj_kind[nobj] = 3
                nobj += 1
    for i0 in range(N):
        if not is_a[i0] or kind[i0] != 0:
            continue
        starts[nobj] = pos
        i = i0
        length = 0
        while True:
            if i < 0:
                return kind, obj, members, starts, obj_kind, mirrors, nmir, 3
            kind[i] = 2
            obj[i] = nobj
            members[pos] = i
            pos += 1
            length += 1
            i = succ[i]
            if i == i0:
                break
            if kind[i] != 0:
                return kind, obj, members, starts, obj_kind, mirrors, nmir, 3
        if length < 4:
            return kind, obj, members, starts, obj_kind, mirrors, nmir, 4
        obj_kind[nobj] = 2
        nobj += 1
    starts[nobj] = pos
    return kind, obj, members[:pos], starts[: nobj + 1], obj_kind[:nobj], mirrors[:nmir], nmir, 0


_ERRORS = {
    1: "a-dimer that belongs to no double edge, loop or path",
    2: "meeting point without a unique lowest pair of opposite a-faces",
    3: "open path or broken loop",
    4: "loop with fewer than four a-dimers",
}


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Decomposition:
    sq: SquishedConfig
    kind: np.ndarray  # (n, n+1)
    obj: np.ndarray  # (n, n+1) object id or -1
    members: np.ndarray  # flat white indices, grouped by object, in trace order
    starts: np.ndarray
    obj_kind: np.ndarray
    mirrors: np.ndarray  # rows (x, y, orientation) of the meeting points

    @property
    def n(self) -> int:
        return self.sq.n

    def _nodes(self, o: int) -> np.ndarray:
        idx = self.members[self.starts[o] : self.starts[o + 1]]
        t = self.sq.tail.reshape(-1, 2)[idx]
        if self.obj_kind[o] == PATH:
            t = np.vstack([t, self.sq.head.reshape(-1, 2)[idx[-1]]])
        return t

    @cached_property
    def loop_ids(self) -> np.ndarray:
        return np.nonzero(self.obj_kind == LOOP)[0]

    @cached_property
    def path_ids(self) -> np.ndarray:
        return np.nonzero(self.obj_kind == PATH)[0]

    @property
    def loops(self) -> list[np.ndarray]:
        """Node cycles of the loops (first node not repeated)."""
        return [self._nodes(o) for o in self.loop_ids]

    @property
    def paths(self) -> list[np.ndarray]:
        return [self._nodes(o) for o in self.path_ids]

    @property
    def double_edges(self) -> list[tuple]:
        t = self.sq.tail[self.kind == DOUBLE]
        h = self.sq.head[self.kind == DOUBLE]
        pairs = {tuple(sorted([tuple(map(int, a)), tuple(map(int, b))])) for a, b in zip(t, h)}
        return sorted(pairs)

    def loop_sign(self, o: int) -> int:
        """+1 for clockwise (positive) loops, -1 for counterclockwise."""
        P = self._nodes(o).astype(np.int64)
        x, y = P[:, 0], P[:, 1]
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        return -1 if area2 > 0 else 1

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "loops": [{"nodes": L.tolist(), "sign": self.loop_sign(o)}
                      for o, L in zip(self.loop_ids, self.loops)],
            "paths": [P.tolist() for P in self.paths],
            "double_edges": [list(map(list, e)) for e in self.double_edges],
            "mirrors": self.mirrors.tolist(),
        }


def decompose_squished(sq: SquishedConfig, H: np.ndarray) -> Decomposition:
    """Decompose with mirrors placed from the full height grid H (a-faces read off H)."""
    n = sq.n
    res = _decompose(n, sq.is_a.ravel(), sq.tail.reshape(-1, 2).astype(np.int64),
                     sq.head.reshape(-1, 2).astype(np.int64), np.asarray(H, dtype=np.int64))
    kind, obj, members, starts, obj_kind, mirrors, _, err = res
    if err:
        raise DecompositionError(_ERRORS[err])
    shape = (n, n + 1)
    return Decomposition(sq, kind.reshape(shape), obj.reshape(shape), members, starts,
                         obj_kind, mirrors)


def place_mirrors(sq: SquishedConfig, ha) -> np.ndarray:
    """Rows (x, y, orientation) for every node with four non-double a-dimers."""
    return decompose_squished(sq, ha.values).mirrors


def decompose(cov, h=None) -> Decomposition:
    from .heights import height_function

    if h is None:
        h = height_function(cov)
    return decompose_squished(squish(cov), h.values)


def loop_census(dec: Decomposition) -> list[tuple[int, int]]:
    """(length, sign) for every loop."""
    lens = np.diff(dec.starts)
    return [(int(lens[o]), dec.loop_sign(o)) for o in dec.loop_ids]


def path_census(dec: Decomposition) -> list[tuple[tuple, tuple, int]]:
    """(start node, end node, length) for every path."""
    out = []
    for o, P in zip(dec.path_ids, dec.paths):
        out.append((tuple(map(int, P[0])), tuple(map(int, P[-1])), len(P) - 1))
    return out
