"""Height function, a-height, loop height and corridor height.

Heights live on face centers (cx, cy), cx + cy even, stored in a
(2n + 1, 2n + 1) integer grid indexed directly by the center coordinates.
Crossing an edge from one face to the next changes the height by

    +3 / -3   covered edge, white->black arrow pointing left / right
    -1 / +1   empty edge,   arrow pointing left / right

and h(0, 0) = 1.  The a-height is the restriction to a-faces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import DIRS

# diagonal steps between neighbouring faces
STEPS = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=np.int64)
MISSING = np.iinfo(np.int64).min


@dataclass(frozen=True)
class HeightField:
    values: np.ndarray  # indexed by face center
    mask: np.ndarray
    flavor: str

    def __call__(self, cx: int, cy: int) -> int:
        if not self.mask[cx, cy]:
            raise KeyError(f"no {self.flavor} height at ({cx}, {cy})")
        return int(self.values[cx, cy])

    def items(self):
        xs, ys = np.nonzero(self.mask)
        return [(int(x), int(y), int(self.values[x, y])) for x, y in zip(xs, ys)]

    def to_csv(self) -> str:
        rows = ["cx,cy,value"] + [f"{x},{y},{v}" for x, y, v in self.items()]
        return "\n".join(rows) + "\n"


def face_increments(n: int, dirs: np.ndarray):
    """inc[x, y, k]: height change from face (x, y) to (x, y) + STEPS[k].

    Entries for pairs that do not share an edge of the diamond are MISSING.
    """
    size = 2 * n + 1
    inc = np.full((size, size, 4), MISSING, dtype=np.int64)
    p, q = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    wx, wy = 2 * p + 1, 2 * q
    for d, (dx, dy) in enumerate(DIRS):
        bx, by = wx + dx, wy + dy
        ok = (bx >= 0) & (bx <= 2 * n) & (by >= 1) & (by <= 2 * n - 1)
        cov = dirs == d
        # faces on the two sides of the edge: (bx, wy) and (wx, by)
        s = 1 if dx * dy < 0 else -1  # arrow points left when travelling (bx,wy) -> (wx,by)
        val = s * (4 * cov.astype(np.int64) - 1)
        k_fwd = _step_code(-dx, dy)
        k_back = _step_code(dx, -dy)
        inc[bx[ok], wy[ok], k_fwd] = val[ok]
        inc[wx[ok], by[ok], k_back] = -val[ok]
    return inc


def _step_code(dx: int, dy: int) -> int:
    for k, (sx, sy) in enumerate(STEPS):
        if sx == dx and sy == dy:
            return k
    raise ValueError((dx, dy))


@numba.njit(cache=True)
def _integrate(inc, start_x, start_y, start_val, stride):
    """BFS integration of increments on a grid; returns (values, mask, ok)."""
    X, Y = inc.shape[0], inc.shape[1]
    miss = np.iinfo(np.int64).min
    H = np.zeros((X, Y), dtype=np.int64)
    seen = np.zeros((X, Y), dtype=np.bool_)
    qx = np.empty(X * Y, dtype=np.int64)
    qy = np.empty(X * Y, dtype=np.int64)
    sx = np.array([1, -1, -1, 1])
    sy = np.array([1, 1, -1, -1])
    H[start_x, start_y] = start_val
    seen[start_x, start_y] = True
    qx[0] = start_x
    qy[0] = start_y
    head, tail = 0, 1
    ok = True
    while head < tail:
        x, y = qx[head], qy[head]
        head += 1
        for k in range(4):
            d = inc[x, y, k]
            if d == miss:
                continue
            u, v = x + stride * sx[k], y + stride * sy[k]
            if not seen[u, v]:
                seen[u, v] = True
                H[u, v] = H[x, y] + d
                qx[tail] = u
                qy[tail] = v
                tail += 1
            elif H[u, v] != H[x, y] + d:
                ok = False
    return H, seen, ok


def height_function(cov) -> HeightField:
    """Full height function anchored at h(0, 0) = 1, checked for path independence."""
    inc = face_increments(cov.n, cov.dirs)
    H, mask, ok = _integrate(inc, 0, 0, 1, 1)
    if not ok:
        raise ValueError("height increments are not path independent; invalid covering")
    return HeightField(H, mask, "full")


def a_face_mask(n: int) -> np.ndarray:
    c = np.arange(2 * n + 1)
    X, Y = np.meshgrid(c, c, indexing="ij")
    return (X % 2 == 1) & (Y % 2 == 1) & ((X + Y) % 4 == 2)


def a_height(h: HeightField) -> HeightField:
    n = (h.values.shape[0] - 1) // 2
    mask = a_face_mask(n) & h.mask
    return HeightField(np.where(mask, h.values, 0), mask, "a-height")


def a_height_increments(n: int, dirs: np.ndarray) -> np.ndarray:
    """inc[x, y, k] between a-faces f and f + 2 STEPS[k], read from a-dimers only.

    Each a-dimer on the squished edge shared by the two a-faces contributes
    +4 when its squished arrow points left of the direction of travel, else -4.
    """
    from .squish import squish_dirs

    sq = squish_dirs(n, dirs)
    size = 2 * n + 1
    inc = np.full((size, size, 4), MISSING, dtype=np.int64)
    amask = a_face_mask(n)
    xs, ys = np.nonzero(amask)
    for k, (sx, sy) in enumerate(STEPS):
        u, v = xs + 2 * sx, ys + 2 * sy
        ok = (u >= 1) & (u <= 2 * n - 1) & (v >= 1) & (v <= 2 * n - 1)
        inc[xs[ok], ys[ok], k] = 0
    t = sq.tail[sq.is_a]
    hd = sq.head[sq.is_a]
    mid = (t + hd) // 2
    delta = (hd - t) // 2
    perp = np.stack([delta[:, 1], -delta[:, 0]], axis=1)
    for sgn in (1, -1):
        f1 = mid - sgn * perp
        travel = 2 * sgn * perp  # f1 -> f2
        cross = travel[:, 0] * delta[:, 1] - travel[:, 1] * delta[:, 0]
        val = np.where(cross > 0, 4, -4)
        k = _STEP_LUT[(travel[:, 0] // 2 + 1) // 2, (travel[:, 1] // 2 + 1) // 2]
        f2 = f1 + travel
        inside = _in_square(f1, n) & _in_square(f2, n)
        np.add.at(inc, (f1[inside, 0], f1[inside, 1], k[inside]), val[inside])
    return inc


# STEPS index of a unit diagonal step, looked up by ((sx + 1) / 2, (sy + 1) / 2)
_STEP_LUT = np.array([[2, 1], [3, 0]], dtype=np.int64)


def a_height_steps(ha: HeightField) -> np.ndarray:
    """Differences of the a-height between all pairs of diagonally adjacent a-faces."""
    v, m = ha.values, ha.mask
    out = []
    for sy in (2, -2):
        a_, b_ = (v[:-2, :-2], v[2:, 2:]) if sy == 2 else (v[:-2, 2:], v[2:, :-2])
        ma, mb = (m[:-2, :-2], m[2:, 2:]) if sy == 2 else (m[:-2, 2:], m[2:, :-2])
        both = ma & mb
        out.append((b_ - a_)[both])
    return np.concatenate(out)


def _in_square(f, n):
    return (f[:, 0] >= 1) & (f[:, 0] <= 2 * n - 1) & (f[:, 1] >= 1) & (f[:, 1] <= 2 * n - 1)


def a_height_from_squished(n: int, dirs: np.ndarray, anchor: tuple[int, int, int]) -> HeightField:
    """Recompute the a-height from the squished configuration, given one value."""
    inc = a_height_increments(n, dirs)
    x0, y0, v0 = anchor
    H, mask, ok = _integrate(inc, x0, y0, v0, 2)
    if not ok:
        raise ValueError("squished a-height increments are inconsistent")
    return HeightField(np.where(mask, H, 0), mask, "a-height")


@numba.njit(cache=True)
def _winding_sum(size, tails, heads, members, starts, obj_kind):
    """Sum over loops of the counterclockwise winding number at every grid point."""
    acc = np.zeros((size, size), dtype=np.int64)
    for o in range(starts.shape[0] - 1):
        if obj_kind[o] != 2:
            continue
        for j in range(starts[o], starts[o + 1]):
            i = members[j]
            x0, y0 = tails[i, 0], tails[i, 1]
            x1, y1 = heads[i, 0], heads[i, 1]
            if x1 > x0:
                xl, yl, slope, sgn = x0, y0, y1 - y0, 1
            else:
                xl, yl, slope, sgn = x1, y1, y0 - y1, -1
            # the segment crosses x = xl + 1/2 just above or below yl
            ys = yl + 2 if slope > 0 else yl
            if 0 <= xl < size and ys < size:
                acc[xl, max(ys, 0)] += sgn
    for x in range(size):
        for y in range(1, size):
            acc[x, y] += acc[x, y - 1]
    return acc


def loop_height(dec) -> HeightField:
    """h_l(f) = 4 (#clockwise loops around f - #counterclockwise loops around f)."""
    n = dec.n
    size = 2 * n + 1
    w = _winding_sum(size, dec.sq.tail.reshape(-1, 2), dec.sq.head.reshape(-1, 2),
                     dec.members, dec.starts, dec.obj_kind)
    mask = a_face_mask(n)
    return HeightField(np.where(mask, -4 * w, 0), mask, "loop")


def corridor_height(ha: HeightField, hl: HeightField) -> HeightField:
    if not np.array_equal(ha.mask, hl.mask):
        raise ValueError("height fields live on different faces")
    v = np.where(ha.mask, ha.values - hl.values, 0)
    if np.any(v % 4):
        raise ValueError("corridor height is not a multiple of 4")
    return HeightField(v, ha.mask, "corridor")


def corridor_flood_fill(dec, ha: HeightField) -> HeightField:
    """Corridor heights by flood fill over a-faces with path dimers as walls.

    Faces are adjacent across non-path a-dimers and through mirrors.  Each
    component touches the boundary, where no loop can surround a face,
    so its value is the a-height of any boundary-touching face in it.
    """
    n = dec.n
    amask = a_face_mask(n)
    xs, ys = np.nonzero(amask)
    idx = -np.ones((2 * n + 1, 2 * n + 1), dtype=np.int64)
    idx[xs, ys] = np.arange(xs.size)
    walls = set()
    sq = dec.sq
    for i in np.nonzero(dec.kind.ravel() == 3)[0]:
        t, h = sq.tail.reshape(-1, 2)[i], sq.head.reshape(-1, 2)[i]
        mid, dl = (t + h) // 2, (h - t) // 2
        f1 = (int(mid[0] + dl[1]), int(mid[1] - dl[0]))
        f2 = (int(mid[0] - dl[1]), int(mid[1] + dl[0]))
        walls.add((min(f1, f2), max(f1, f2)))
    rows, cols = [], []
    for sx, sy in ((2, 2), (2, -2)):
        u, v = xs + sx, ys + sy
        ok = (u >= 1) & (u <= 2 * n - 1) & (v >= 1) & (v <= 2 * n - 1)
        for x, y, x2, y2 in zip(xs[ok], ys[ok], u[ok], v[ok]):
            f1, f2 = (int(x), int(y)), (int(x2), int(y2))
            if (min(f1, f2), max(f1, f2)) not in walls:
                rows.append(idx[f1])
                cols.append(idx[f2])
    # where two paths pinch at a node, the mirror marks the passage between its two faces
    for x, y, o in np.asarray(dec.mirrors).reshape(-1, 3):
        dx, dy = (2, 0) if o == 0 else (0, 2)
        f1, f2 = (int(x - dx), int(y - dy)), (int(x + dx), int(y + dy))
        if all(1 <= c <= 2 * n - 1 for c in f1 + f2):
            rows.append(idx[f1])
            cols.append(idx[f2])
    N = xs.size
    G = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N))
    _, lab = connected_components(G, directed=False)
    edge = (xs == 1) | (xs == 2 * n - 1) | (ys == 1) | (ys == 2 * n - 1)
    value = {}
    for c, x, y in zip(lab[edge], xs[edge], ys[edge]):
        v = int(ha.values[x, y])
        if value.setdefault(int(c), v) != v:
            raise ValueError("boundary faces of one corridor disagree")
    out = np.zeros_like(ha.values)
    for j, (x, y) in enumerate(zip(xs, ys)):
        if int(lab[j]) not in value:
            raise ValueError(f"corridor containing ({x}, {y}) does not reach the boundary")
        out[x, y] = value[int(lab[j])]
    return HeightField(out, amask, "corridor")
