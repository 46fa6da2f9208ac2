"""Total orders on the grid points of the unit square.

A grid order is realized by an injective integer key per cell; comparing
keys realizes the order. For the hierarchical curves (zorder, hilbert) the
key is the traversal index of the cell. For the triangle-bisection curve
(sierpinski) the key is the index of the first depth-2g triangle that
enters the cell, which sorts cells by first entry time; ranks are obtained
by compressing those keys. Row-major is a non-hierarchical scan baseline,
and file-backed oracles replay an explicit permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import (
    BudgetError,
    DuplicatePointError,
    OrderFileError,
    ParameterError,
    SnapError,
)
from .geometry import TOL, Point, StripRegion

CURVE_KINDS = ("rowmajor", "zorder", "hilbert", "sierpinski")
KINDS = CURVE_KINDS + ("file",)

MAX_G = 30  # beyond this the exact integer key arithmetic would overflow
RANK_TABLE_MAX_G = 12

LESS, EQUAL, GREATER = -1, 0, 1


@dataclass(frozen=True)
class GridSpec:
    """Grid of cell centers ((i+1/2)/2^g, (k+1/2)/2^g) for i,k in [0, 2^g)."""

    g: int

    def __post_init__(self):
        if not (1 <= self.g <= MAX_G):
            raise ParameterError(f"grid exponent g must be in [1, {MAX_G}], got {self.g}")

    @property
    def n(self) -> int:
        return 1 << self.g

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.g)

    def center(self, ix: int, iy: int) -> Point:
        s = self.spacing
        return Point((ix + 0.5) * s, (iy + 0.5) * s)

    def nearest_cell(self, p: Point) -> tuple[int, int]:
        """Nearest cell, ties broken toward the lower index."""
        n = self.n
        ix = min(n - 1, max(0, math.ceil(p.x * n - 1.0 - TOL)))
        iy = min(n - 1, max(0, math.ceil(p.y * n - 1.0 - TOL)))
        return ix, iy

    def snap(self, p: Point) -> tuple[int, int]:
        """Cell whose center coincides with p (within tolerance)."""
        ix, iy = self.nearest_cell(p)
        c = self.center(ix, iy)
        if abs(c.x - p.x) > TOL or abs(c.y - p.y) > TOL:
            raise SnapError(f"point ({p.x}, {p.y}) is not a grid cell center at g={self.g}")
        return ix, iy

    def cells_in_aabb(self, box) -> tuple[np.ndarray, np.ndarray]:
        """Indices of all cells whose centers lie inside the box (closed)."""
        x0, y0, x1, y1 = box
        n = self.n
        lo_x = max(0, math.ceil(x0 * n - 0.5 - TOL))
        hi_x = min(n - 1, math.floor(x1 * n - 0.5 + TOL))
        lo_y = max(0, math.ceil(y0 * n - 0.5 - TOL))
        hi_y = min(n - 1, math.floor(y1 * n - 0.5 + TOL))
        if lo_x > hi_x or lo_y > hi_y:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        xs = np.arange(lo_x, hi_x + 1, dtype=np.int64)
        ys = np.arange(lo_y, hi_y + 1, dtype=np.int64)
        gx, gy = np.meshgrid(xs, ys)
        return gx.ravel(), gy.ravel()


# ---------------------------------------------------------------------------
# Key functions (all vectorized over int64 index arrays)
# ---------------------------------------------------------------------------


def _keys_rowmajor(ix: np.ndarray, iy: np.ndarray, g: int) -> np.ndarray:
    return (iy.astype(np.int64) << g) | ix.astype(np.int64)


def _spread_bits(v: np.ndarray) -> np.ndarray:
    """Insert a zero bit between each of the low 32 bits."""
    v = v.astype(np.int64)
    v = (v | (v << 16)) & 0x0000FFFF0000FFFF
    v = (v | (v << 8)) & 0x00FF00FF00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v << 2)) & 0x3333333333333333
    v = (v | (v << 1)) & 0x5555555555555555
    return v


def _keys_zorder(ix: np.ndarray, iy: np.ndarray, g: int) -> np.ndarray:
    return _spread_bits(ix) | (_spread_bits(iy) << 1)


def _keys_hilbert(ix: np.ndarray, iy: np.ndarray, g: int) -> np.ndarray:
    x = ix.astype(np.int64).copy()
    y = iy.astype(np.int64).copy()
    d = np.zeros(x.shape, np.int64)
    s = np.int64(1) << (g - 1)
    while s > 0:
        rx = ((x & s) > 0).astype(np.int64)
        ry = ((y & s) > 0).astype(np.int64)
        d += s * s * ((3 * rx) ^ ry)
        # rotate the quadrant so the sub-curve is upright
        flip = ry == 0
        swap_flip = flip & (rx == 1)
        x = np.where(swap_flip, s - 1 - x, x)
        y = np.where(swap_flip, s - 1 - y, y)
        x2 = np.where(flip, y, x)
        y2 = np.where(flip, x, y)
        x, y = x2, y2
        s >>= 1
    return d


def _keys_sierpinski(ix: np.ndarray, iy: np.ndarray, g: int) -> np.ndarray:
    """First-entry triangle index at bisection depth 2g, per cell center.

    Coordinates are scaled by 2^(g+1) so every triangle vertex stays an
    exact integer; all orientation tests are then exact in int64.
    """
    S = np.int64(1) << (g + 1)
    px = 2 * ix.astype(np.int64) + 1
    py = 2 * iy.astype(np.int64) + 1
    n = px.shape[0] if px.ndim else 1
    zero = np.zeros(px.shape, np.int64)
    full = np.full(px.shape, S, np.int64)

    below = py <= px  # tie on the main diagonal goes to the earlier triangle
    key = np.where(below, 0, 1).astype(np.int64)
    v0x = np.where(below, zero, full)
    v0y = np.where(below, zero, full)
    v1x = np.where(below, full, zero)
    v1y = np.where(below, zero, full)
    v2x = np.where(below, full, zero)
    v2y = np.where(below, full, zero)
    # triangle (v0, v1, v2): right angle at v1, hypotenuse v0-v2

    for _ in range(2 * g):
        mx = (v0x + v2x) >> 1
        my = (v0y + v2y) >> 1
        ex, ey = mx - v1x, my - v1y
        cross_p = ex * (py - v1y) - ey * (px - v1x)
        cross_0 = ex * (v0y - v1y) - ey * (v0x - v1x)
        first = cross_p * np.sign(cross_0) >= 0  # boundary goes to the earlier child
        key = (key << 1) | np.where(first, 0, 1)
        nv0x = np.where(first, v0x, v1x)
        nv0y = np.where(first, v0y, v1y)
        nv2x = np.where(first, v1x, v2x)
        nv2y = np.where(first, v1y, v2y)
        v0x, v0y, v1x, v1y, v2x, v2y = nv0x, nv0y, mx, my, nv2x, nv2y
    return key


_KEY_FUNCS = {
    "rowmajor": _keys_rowmajor,
    "zorder": _keys_zorder,
    "hilbert": _keys_hilbert,
    "sierpinski": _keys_sierpinski,
}

# cached rank tables for kinds whose raw keys are not already ranks
_RANK_CACHE: dict[tuple[str, int], np.ndarray] = {}


@dataclass(frozen=True)
class OrderOracle:
    """A strict total order on the cells of a grid.

    compare/sort work through injective raw keys; `curve_key` reports the
    rank of a cell along the traversal (identical to the raw key for the
    hierarchical curves and for file orders).
    """

    kind: str
    grid: GridSpec
    table: Optional[np.ndarray] = None  # file orders: rank[iy, ix]
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown order kind {self.kind!r}")
        if self.kind == "file":
            if self.table is None:
                raise ParameterError("file-backed oracle needs a rank table")
            n = self.grid.n
            if self.table.shape != (n, n):
                raise ParameterError(
                    f"rank table shape {self.table.shape} does not match g={self.grid.g}"
                )
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    # -- raw keys ----------------------------------------------------------

    def keys(self, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
        ix = np.asarray(ix, np.int64)
        iy = np.asarray(iy, np.int64)
        if self.kind == "file":
            return self.table[iy, ix].astype(np.int64)
        return _KEY_FUNCS[self.kind](ix, iy, self.grid.g)

    def key_of_cell(self, ix: int, iy: int) -> int:
        return int(self.keys(np.asarray([ix]), np.asarray([iy]))[0])

    def key_of_point(self, p: Point) -> int:
        ix, iy = self.grid.snap(p)
        return self.key_of_cell(ix, iy)

    # -- public order operations -------------------------------------------

    def curve_key(self, p: Point) -> int:
        """Index of the cell along the traversal (0-based rank)."""
        raw = self.key_of_point(p)
        if self.kind != "sierpinski":
            return raw
        return int(np.searchsorted(self._rank_table(), raw))

    def _rank_table(self) -> np.ndarray:
        g = self.grid.g
        cache_key = (self.kind, g)
        tab = _RANK_CACHE.get(cache_key)
        if tab is None:
            if g > RANK_TABLE_MAX_G:
                raise BudgetError(
                    f"rank compression needs a full table; g={g} exceeds {RANK_TABLE_MAX_G}"
                )
            n = self.grid.n
            gx, gy = np.meshgrid(np.arange(n, dtype=np.int64), np.arange(n, dtype=np.int64))
            tab = np.sort(self.keys(gx.ravel(), gy.ravel()))
            _RANK_CACHE[cache_key] = tab
        return tab

    def compare(self, p: Point, q: Point) -> int:
        """-1, 0, +1 for p before, equal to, after q."""
        kp = self.key_of_point(p)
        kq = self.key_of_point(q)
        return LESS if kp < kq else (GREATER if kp > kq else EQUAL)

    def sort_by_order(self, points: Iterable[Point]) -> list[Point]:
        pts = list(points)
        if not pts:
            return []
        cells = [self.grid.snap(p) for p in pts]
        seen = {}
        for p, c in zip(pts, cells):
            if c in seen:
                raise DuplicatePointError(
                    f"points ({seen[c].x},{seen[c].y}) and ({p.x},{p.y}) share cell {c}"
                )
            seen[c] = p
        ix = np.asarray([c[0] for c in cells], np.int64)
        iy = np.asarray([c[1] for c in cells], np.int64)
        ks = self.keys(ix, iy)
        return [pts[i] for i in np.argsort(ks, kind="stable")]

    # -- hierarchical block bounds ------------------------------------------

    def min_key_in_block(self, depth: int, bx: int, by: int) -> int:
        """Smallest key of any cell in the dyadic block at the given depth."""
        g = self.grid.g
        shift = g - depth
        if self.kind == "rowmajor":
            return self.key_of_cell(bx << shift, by << shift)
        if self.kind == "zorder":
            return self.key_of_cell(bx << shift, by << shift) & ~((1 << (2 * shift)) - 1)
        if self.kind == "hilbert":
            if depth == 0:
                return 0
            sub = _keys_hilbert(
                np.asarray([bx], np.int64), np.asarray([by], np.int64), depth
            )[0]
            return int(sub) << (2 * shift)
        if self.kind == "sierpinski":
            return _sierpinski_block_min(g, depth, bx, by)
        # file: brute scan of the block
        n0, n1 = bx << shift, by << shift
        size = 1 << shift
        return int(self.table[n1 : n1 + size, n0 : n0 + size].min())

    # -- ascending streams ---------------------------------------------------

    def stream_cells_ascending(
        self, region: StripRegion, budget: int = 2_000_000
    ) -> Iterator[tuple[int, int, int]]:
        """Yield (key, ix, iy) of region cells in ascending key order."""
        if self.kind == "sierpinski":
            yield from _sierpinski_stream(self, region, budget)
        elif self.kind == "rowmajor":
            yield from _rowmajor_stream(self, region, budget)
        elif self.kind in ("zorder", "hilbert"):
            yield from _block_stream(self, region, budget)
        else:
            yield from _brute_stream(self, region)


def _sierpinski_block_min(g: int, depth: int, bx: int, by: int) -> int:
    """First-entry index over all cells of an aligned dyadic block (exact)."""
    S = 1 << (g + 1)
    shift = g - depth
    X0, X1 = (bx << shift) * 2, ((bx + 1) << shift) * 2
    Y0, Y1 = (by << shift) * 2, ((by + 1) << shift) * 2

    def overlaps(v0, v1, v2):
        return _tri_box_overlap(v0, v1, v2, X0, Y0, X1, Y1)

    t0 = ((0, 0), (S, 0), (S, S))
    t1 = ((S, S), (0, S), (0, 0))
    if overlaps(*t0):
        key, (v0, v1, v2) = 0, t0
    else:
        key, (v0, v1, v2) = 1, t1
    for _ in range(2 * g):
        m = ((v0[0] + v2[0]) >> 1, (v0[1] + v2[1]) >> 1)
        c1 = (v0, m, v1)
        if overlaps(*c1):
            key, (v0, v1, v2) = key << 1, c1
        else:
            key, (v0, v1, v2) = (key << 1) | 1, (v1, m, v2)
    return key


def _tri_box_overlap(v0, v1, v2, X0, Y0, X1, Y1) -> bool:
    """Positive-area overlap of a right isoceles triangle and a box (all ints).

    Triangle edges here are axis-aligned or diagonal, so separation only
    needs the four axes (1,0), (0,1), (1,1), (1,-1). Touching along an edge
    does not count as overlap.
    """
    tx = (v0[0], v1[0], v2[0])
    ty = (v0[1], v1[1], v2[1])
    if max(tx) <= X0 or min(tx) >= X1 or max(ty) <= Y0 or min(ty) >= Y1:
        return False
    # diagonal axes
    tpp = tuple(x + y for x, y in zip(tx, ty))
    bpp = (X0 + Y0, X1 + Y1)
    if max(tpp) <= bpp[0] or min(tpp) >= bpp[1]:
        return False
    tpm = tuple(x - y for x, y in zip(tx, ty))
    bpm = (X0 - Y1, X1 - Y0)
    if max(tpm) <= bpm[0] or min(tpm) >= bpm[1]:
        return False
    return True


def _sierpinski_stream(oracle: OrderOracle, region: StripRegion, budget: int):
    """Depth-first traversal of the bisection tree, pruned by the region.

    The accumulated path index of a leaf equals the cell's first-entry key:
    a cell whose center lies in the region never has a pruned half, so it
    is always reached through its earlier half first.
    """
    g = oracle.grid.g
    S = 1 << (g + 1)
    inv = 1.0 / S
    depth_max = 2 * g
    seen: set[tuple[int, int]] = set()
    stack = [((S, S), (0, S), (0, 0), 0, 1), ((0, 0), (S, 0), (S, S), 0, 0)]
    steps = 0
    while stack:
        steps += 1
        if steps > budget:
            raise BudgetError("cell stream exceeded its search budget")
        v0, v1, v2, depth, key = stack.pop()
        xs = (v0[0], v1[0], v2[0])
        ys = (v0[1], v1[1], v2[1])
        if not region.may_intersect_hull(
            (xs[0] * inv, xs[1] * inv, xs[2] * inv),
            (ys[0] * inv, ys[1] * inv, ys[2] * inv),
        ):
            continue
        if depth == depth_max:
            cell = (min(xs) >> 1, min(ys) >> 1)
            if cell in seen:
                continue
            seen.add(cell)
            cx, cy = oracle.grid.center(*cell)
            if region.contains(cx, cy):
                yield (key, cell[0], cell[1])
            continue
        m = ((v0[0] + v2[0]) >> 1, (v0[1] + v2[1]) >> 1)
        stack.append((v1, m, v2, depth + 1, (key << 1) | 1))
        stack.append((v0, m, v1, depth + 1, key << 1))


def _block_stream(oracle: OrderOracle, region: StripRegion, budget: int):
    """Key-ordered DFS over aligned blocks for block-contiguous curves."""
    g = oracle.grid.g
    spacing = oracle.grid.spacing
    steps = 0
    stack = [(oracle.min_key_in_block(0, 0, 0), 0, 0, 0)]
    while stack:
        steps += 1
        if steps > budget:
            raise BudgetError("cell stream exceeded its search budget")
        key, depth, bx, by = stack.pop()
        side = spacing * (1 << (g - depth))
        box = (bx * side, by * side, (bx + 1) * side, (by + 1) * side)
        if not region.may_intersect_aabb(box):
            continue
        if depth == g:
            cx, cy = oracle.grid.center(bx, by)
            if region.contains(cx, cy):
                yield (key, bx, by)
            continue
        kids = []
        for dx in (0, 1):
            for dy in (0, 1):
                cxi, cyi = 2 * bx + dx, 2 * by + dy
                kids.append((oracle.min_key_in_block(depth + 1, cxi, cyi), depth + 1, cxi, cyi))
        kids.sort(reverse=True)  # smallest key on top of the stack
        stack.extend(kids)


def _rowmajor_stream(oracle: OrderOracle, region: StripRegion, budget: int):
    """Bottom-up row scan; within a row, ascending column order.

    Each row's admissible column interval is cut down by both the strip
    constraint and the projection window, so thin regions at any angle
    stay cheap.
    """
    grid = oracle.grid
    n = grid.n
    h = region.halfwidth
    line = region.line
    dx, dy = line.direction()
    nx, ny = line.normal()
    anchor = line.anchor()
    x0, y0, x1, y1 = region.bounds
    ylo, yhi = y0, y1
    if region.span is not None:
        s0, s1 = region.span
        ylo = max(ylo, anchor.y + min(s0 * dy, s1 * dy) - abs(ny) * h)
        yhi = min(yhi, anchor.y + max(s0 * dy, s1 * dy) + abs(ny) * h)
    lo_y = max(0, math.ceil(ylo * n - 0.5 - TOL))
    hi_y = min(n - 1, math.floor(yhi * n - 0.5 + TOL))
    lo_x = max(0, math.ceil(x0 * n - 0.5 - TOL))
    hi_x = min(n - 1, math.floor(x1 * n - 0.5 + TOL))
    steps = 0
    for iy in range(lo_y, hi_y + 1):
        steps += 1
        if steps > budget:
            raise BudgetError("cell stream exceeded its search budget")
        cy = (iy + 0.5) * grid.spacing
        a, b = lo_x, hi_x
        if abs(nx) > TOL:
            # solve |(x-cx0)*nx + (y-cy0)*ny - off| < h for x
            base = line.offset - (cy - 0.5) * ny
            xa = (base - h) / nx + 0.5
            xb = (base + h) / nx + 0.5
            if xa > xb:
                xa, xb = xb, xa
            a = max(a, math.ceil(xa * n - 0.5 - TOL))
            b = min(b, math.floor(xb * n - 0.5 + TOL))
        elif abs((cy - 0.5) * ny - line.offset) >= h:
            continue
        if region.span is not None:
            s0, s1 = region.span
            if abs(dx) > TOL:
                ta = (s0 - (cy - anchor.y) * dy) / dx + anchor.x
                tb = (s1 - (cy - anchor.y) * dy) / dx + anchor.x
                if ta > tb:
                    ta, tb = tb, ta
                a = max(a, math.ceil(ta * n - 0.5 - TOL))
                b = min(b, math.floor(tb * n - 0.5 + TOL))
            else:
                t = (cy - anchor.y) * dy
                if t < s0 - TOL or t > s1 + TOL:
                    continue
        for ix in range(a, b + 1):
            steps += 1
            if steps > budget:
                raise BudgetError("cell stream exceeded its search budget")
            cx = (ix + 0.5) * grid.spacing
            if region.contains(cx, cy):
                yield (oracle.key_of_cell(ix, iy), ix, iy)


def _brute_stream(oracle: OrderOracle, region: StripRegion):
    ix, iy = oracle.grid.cells_in_aabb(region.bounds)
    if ix.size == 0:
        return
    xs = (ix + 0.5) * oracle.grid.spacing
    ys = (iy + 0.5) * oracle.grid.spacing
    keep = np.fromiter(
        (region.contains(float(x), float(y)) for x, y in zip(xs, ys)),
        bool,
        count=ix.size,
    )
    ix, iy = ix[keep], iy[keep]
    ks = oracle.keys(ix, iy)
    for i in np.argsort(ks, kind="stable"):
        yield (int(ks[i]), int(ix[i]), int(iy[i]))


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------


def make_oracle(kind: str, g: int) -> OrderOracle:
    if kind == "file":
        raise ParameterError("file oracles are created by load_order_file")
    return OrderOracle(kind=kind, grid=GridSpec(g))


def oracle_from_ranks(ranks: np.ndarray, label: str = "table") -> OrderOracle:
    """Oracle from an explicit rank table rank[iy, ix] (a permutation)."""
    n = ranks.shape[0]
    g = n.bit_length() - 1
    if ranks.shape != (n, n) or (1 << g) != n:
        raise ParameterError(f"rank table must be square with power-of-two side, got {ranks.shape}")
    flat = np.sort(ranks.ravel())
    if not np.array_equal(flat, np.arange(n * n)):
        raise ParameterError("rank table is not a permutation of 0..n^2-1")
    return OrderOracle(kind="file", grid=GridSpec(g), table=ranks.astype(np.int64), label=label)


def load_order_file(path: str, label: str = "") -> OrderOracle:
    """Load a cell permutation: line 1 is "g=<int>", then "ix iy" per line."""
    g = None
    table = None
    count = 0
    n = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if g is None:
                if not text.startswith("g="):
                    raise OrderFileError("expected resolution declaration 'g=<int>'", lineno)
                try:
                    g = int(text[2:])
                except ValueError:
                    raise OrderFileError(f"bad resolution {text!r}", lineno) from None
                if not (1 <= g <= RANK_TABLE_MAX_G):
                    raise OrderFileError(f"g={g} outside [1, {RANK_TABLE_MAX_G}]", lineno)
                n = 1 << g
                table = np.full((n, n), -1, np.int64)
                continue
            parts = text.split()
            if len(parts) != 2:
                raise OrderFileError(f"expected 'ix iy', got {text!r}", lineno)
            try:
                ix, iy = int(parts[0]), int(parts[1])
            except ValueError:
                raise OrderFileError(f"non-integer cell {text!r}", lineno) from None
            if not (0 <= ix < n and 0 <= iy < n):
                raise OrderFileError(f"cell ({ix},{iy}) out of range for g={g}", lineno)
            if table[iy, ix] != -1:
                raise OrderFileError(f"cell ({ix},{iy}) listed twice", lineno)
            table[iy, ix] = count
            count += 1
    if g is None:
        raise OrderFileError("empty order file", None)
    if count != n * n:
        missing = np.argwhere(table == -1)[0]
        raise OrderFileError(
            f"order lists {count} of {n * n} cells; first missing ({missing[1]},{missing[0]})",
            None,
        )
    return OrderOracle(kind="file", grid=GridSpec(g), table=table, label=label or "file")


__all__ = [
    "CURVE_KINDS",
    "KINDS",
    "GridSpec",
    "OrderOracle",
    "make_oracle",
    "oracle_from_ranks",
    "load_order_file",
    "LESS",
    "EQUAL",
    "GREATER",
]
