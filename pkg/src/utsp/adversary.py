"""Adversarial point-set constructions against a grid order.

Two construction families are implemented. The spiral chain walks a
strictly order-decreasing sequence of grid points between adjacent radial
rays, growing the radius by a secant factor per step; when it cannot
continue, the blocking configuration is itself a certified backtrack. The
backtracking-set family fixes one backtrack per dyadic square, samples
random discrete-slope lines, collects the squares whose backtrack the line
passes through, and certifies a detour tour upper bound together with a
cost lower bound on the resulting set.

Backtrack searches run in one of two modes: "spiral" uses only the chain
process, while "full" (default) falls back to a direct search that walks
region cells in ascending order and places the two rectangles around a
pivot that precedes every cell they contain.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cyclewalk import CycleWalk, DichotomyOutcome, ZigZag, dichotomy, integer_cube_root
from .errors import (
    BudgetError,
    ConstructionError,
    CoverageError,
    ParameterError,
    ResolutionError,
)
from .geometry import (
    CENTER_X,
    CENTER_Y,
    TOL,
    AngleIndex,
    DiscreteLine,
    DyadicSquare,
    OrientedRect,
    Point,
    Ray,
    Strip,
    StripRegion,
    clip_line_to_square,
    dist,
    dyadic_squares,
    point_line_distance,
    segment_hausdorff_within,
)
from .orders import MAX_G, GridSpec, OrderOracle
from .tsp import RatioReport, cost_under_order, measure_order_ratio, tsp_upper_tour

ATLAS_BUDGET = 4 ** 10
# full: spiral process first, then the direct strip search
# spiral: the chain process only (no fallback)
# direct: the strip search only; keeps backtrack lines axis-aligned, which
#         lets one sampled line pass whole rows of same-scale squares
SEARCH_MODES = ("full", "spiral", "direct")


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Params:
    """Construction parameters: scales r, angles M, lengths l > w, sparsity c."""

    r: int
    M: int
    l: float
    w: float
    c: int
    s: int
    g: int
    strict: bool = False
    w_clamped: bool = False
    chain_cap: Optional[int] = None
    search: str = "full"

    def __post_init__(self):
        if self.M < 8 or self.M % 4 != 0:
            raise ParameterError(f"M must be a multiple of 4 and >= 8, got {self.M}")
        if self.r < 0:
            raise ParameterError(f"r must be >= 0, got {self.r}")
        if self.c < 1:
            raise ParameterError(f"scale sparsity c must be >= 1, got {self.c}")
        if self.s < 1:
            raise ParameterError(f"oscillation parameter s must be >= 1, got {self.s}")
        if not (0.0 < self.w < self.l < 1.0):
            raise ParameterError(f"need 0 < w < l < 1, got w={self.w}, l={self.l}")
        guard = math.tan(2 * math.pi / self.M) / 2
        if self.l >= guard:
            raise ParameterError(
                f"l={self.l} must stay below tan(2*pi/M)/2={guard:.6g} so the"
                " rectangles clear their pivot"
            )
        if not (1 <= self.g <= MAX_G):
            raise ParameterError(f"g must be in [1, {MAX_G}], got {self.g}")
        if self.search not in SEARCH_MODES:
            raise ParameterError(f"search mode must be one of {SEARCH_MODES}")

    @property
    def cap(self) -> int:
        return self.M * self.M if self.chain_cap is None else self.chain_cap

    def scales(self) -> list[int]:
        return [self.c * t for t in range(self.r // self.c + 1)]

    def check_resolution(self, scale: int) -> None:
        if 2.0 ** (-self.g) > self.w * 2.0 ** (-scale) / 4.0:
            raise ParameterError(
                f"grid spacing 2^-{self.g} is too coarse for width {self.w}"
                f" at scale {scale}; need 2^-g <= w*2^-t/4"
            )

    def to_dict(self) -> dict:
        return {
            "r": self.r, "M": self.M, "l": self.l, "w": self.w, "c": self.c,
            "s": self.s, "g": self.g, "strict": self.strict,
            "w_clamped": self.w_clamped, "chain_cap": self.chain_cap,
            "search": self.search,
        }


def default_params(
    r: int,
    M: int,
    strict: bool = False,
    g: Optional[int] = None,
    search: str = "full",
    chain_cap: Optional[int] = None,
) -> Params:
    """Canonical parameter choice: l = 1/(100 M^4), w = sqrt(4 M log r / r).

    In strict mode the admissible ranges of r and M are enforced and any
    violation is reported with the failing inequality. In desk mode an
    overly wide w is clamped to l/2 and the clamp is flagged.
    """
    if M < 8 or M % 4 != 0:
        raise ParameterError(f"M must be a multiple of 4 and >= 8, got {M}")
    if r < 4:
        raise ParameterError(f"r must be >= 4, got {r}")
    l = 1.0 / (100.0 * M ** 4)
    w = math.sqrt(4.0 * M * math.log(r) / r)
    clamped = False
    if strict:
        if not M > 180 ** 2:
            raise ParameterError(f"strict mode violated: M={M} <= 180^2")
        bound = 1e-5 * (r / math.log(r)) ** (1.0 / 9.0)
        if not M <= bound:
            raise ParameterError(f"strict mode violated: M={M} > 1e-5 (r/log r)^(1/9) = {bound:.6g}")
        if not w < l:
            raise ParameterError(f"strict mode violated: w={w:.6g} >= l={l:.6g}")
    elif w >= l:
        w = l / 2.0
        clamped = True
    c = max(1, round(0.5 * math.log2(r) + 0.5 * math.log2(M) - math.log2(360.0)))
    s = integer_cube_root(M)
    rmax = c * (r // c)
    if g is None:
        g = max(1, math.ceil(rmax + 2 - math.log2(w)))
        if g > MAX_G:
            raise ParameterError(
                f"derived grid exponent g={g} exceeds {MAX_G}; pass a coarser"
                " configuration or an explicit g"
            )
    return Params(
        r=r, M=M, l=l, w=w, c=c, s=s, g=g, strict=strict, w_clamped=clamped,
        chain_cap=chain_cap, search=search,
    )


# ---------------------------------------------------------------------------
# Rays and the secant step
# ---------------------------------------------------------------------------


def radial_ray(center: Point, angle: AngleIndex) -> Ray:
    return Ray(center, angle)


def secant_observation_check(
    q: Point, angle: AngleIndex, center: Point = Point(CENTER_X, CENTER_Y)
) -> tuple[Point, Point]:
    """Intersections of the perpendicular through q with the adjacent rays.

    Both lie at distance ||q - center|| * sec(2*pi/M) from the center.
    """
    if angle.M < 8:
        raise ParameterError(f"needs M >= 8, got M={angle.M}")
    rho = dist(q, center)
    if rho <= TOL:
        raise ParameterError("q coincides with the ray origin")
    ray = Ray(center, angle)
    from .geometry import point_ray_distance

    if point_ray_distance(q, ray) > 1e-9 * max(1.0, rho):
        raise ParameterError("q does not lie on the given ray")
    sec = 1.0 / math.cos(2 * math.pi / angle.M)
    out = []
    for k in (+1, -1):
        dx, dy = angle.shifted(k).direction()
        out.append(Point(center.x + rho * sec * dx, center.y + rho * sec * dy))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Backtracks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Backtrack:
    """Certified configuration (p, L, sigma, R1, R2) inside one dyadic square."""

    p: Point
    line: DiscreteLine
    strip: Strip
    r1: OrientedRect
    r2: OrientedRect
    square: DyadicSquare
    scale: int


def _cells_in_rect(grid: GridSpec, rect: OrientedRect) -> tuple[np.ndarray, np.ndarray]:
    ix, iy = grid.cells_in_aabb(rect.aabb())
    if ix.size == 0:
        return ix, iy
    xs = (ix + 0.5) * grid.spacing
    ys = (iy + 0.5) * grid.spacing
    keep = rect.contains_many(xs, ys)
    return ix[keep], iy[keep]


def verify_backtrack(oracle: OrderOracle, bt: Backtrack) -> int:
    """Exhaustively re-check a backtrack certificate; returns cells scanned."""
    grid = oracle.grid
    halfwidth = bt.strip.halfwidth
    if point_line_distance(bt.p, bt.line) >= halfwidth:
        raise ConstructionError("pivot is not strictly inside the strip width")
    if not bt.square.contains(bt.p, tol=TOL):
        raise ConstructionError("pivot left its square")
    dx, dy = bt.line.direction()
    anchor = bt.line.anchor()
    proj_p = (bt.p.x - anchor.x) * dx + (bt.p.y - anchor.y) * dy
    sides = []
    for rect in (bt.r1, bt.r2):
        for corner in rect.corners():
            if not bt.square.contains(corner, tol=1e-9):
                raise ConstructionError("rectangle corner left the square")
        if point_line_distance(rect.center, bt.line) + rect.width / 2 > halfwidth + 1e-9:
            raise ConstructionError("rectangle leaves the strip")
        proj_c = (rect.center.x - anchor.x) * dx + (rect.center.y - anchor.y) * dy
        if abs(proj_c - proj_p) <= rect.length / 2:
            raise ConstructionError("pivot is not strictly outside a rectangle span")
        sides.append(proj_c - proj_p)
    if sides[0] * sides[1] >= 0:
        raise ConstructionError("rectangles are on the same side of the pivot")
    kp = oracle.key_of_point(bt.p)
    checked = 0
    for rect in (bt.r1, bt.r2):
        ix, iy = _cells_in_rect(grid, rect)
        if ix.size == 0:
            raise ConstructionError("certified rectangle contains no grid point")
        keys = oracle.keys(ix, iy)
        if (keys <= kp).any():
            raise ConstructionError("a rectangle point does not follow the pivot")
        checked += int(ix.size)
    return checked


# ---------------------------------------------------------------------------
# Spiral chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpiralChain:
    """Strictly decreasing chain hopping between adjacent radial rays."""

    square: DyadicSquare
    M: int
    points: list[Point]
    anchors: list[Point]
    rays: list[int]  # canonical ray indices in [1, M]
    termination: str  # "completed" | "exited_square" | "backtrack_found"
    backtrack: Optional[Backtrack] = None

    @property
    def k(self) -> int:
        return len(self.points)


def spiral_chain(oracle: OrderOracle, square: DyadicSquare, params: Params) -> SpiralChain:
    """Run the ray-hopping construction until it completes, exits, or sticks."""
    M = params.M
    t = square.scale
    params.check_resolution(t)
    grid = oracle.grid
    h = square.side
    l_loc = params.l * h
    w_loc = params.w * h
    center = square.center
    sec = 1.0 / math.cos(2 * math.pi / M)

    j = M  # start on the ray pointing east
    rho = h / 4.0
    q = Point(center.x + rho, center.y)
    ix0, iy0 = grid.nearest_cell(q)
    p = grid.center(ix0, iy0)
    points, anchors, rays = [p], [q], [j]
    kp = oracle.key_of_point(p)

    cap = params.cap
    termination = "completed"
    backtrack = None
    while len(points) < cap:
        angle = AngleIndex(j, M)
        perp = angle.perpendicular()
        line = DiscreteLine.through_point(p, perp)
        # candidate anchors on the neighboring rays, one secant step out
        rho_next = rho * sec
        cands = []
        for k in (+1, -1):
            dxk, dyk = angle.shifted(k).direction()
            a_pt = Point(center.x + rho_next * dxk, center.y + rho_next * dyk)
            c_pt = Point(p.x + (a_pt.x - q.x), p.y + (a_pt.y - q.y))
            rect = OrientedRect(center=c_pt, angle=perp, length=l_loc, width=w_loc)
            cands.append((k, a_pt, rect))
        if any(
            not square.contains(corner, tol=0.0)
            for _, _, rect in cands
            for corner in rect.corners()
        ):
            termination = "exited_square"
            break
        cells = []
        for k, a_pt, rect in cands:
            ix, iy = _cells_in_rect(grid, rect)
            if ix.size == 0:
                raise ResolutionError(
                    f"rectangle at scale {t} holds no grid point at g={params.g}"
                )
            cells.append((k, a_pt, ix, iy))
        best = None
        for k, a_pt, ix, iy in cells:
            keys = oracle.keys(ix, iy)
            mask = keys < kp
            if mask.any():
                pos = int(np.argmax(np.where(mask, keys, np.iinfo(np.int64).min)))
                if best is None or keys[pos] > best[0]:
                    best = (int(keys[pos]), k, a_pt, int(ix[pos]), int(iy[pos]))
        if best is None:
            strip = Strip(line, w_loc)
            backtrack = Backtrack(
                p=p, line=line, strip=strip, r1=cands[0][2], r2=cands[1][2],
                square=square, scale=t,
            )
            termination = "backtrack_found"
            break
        kp, k_dir, a_pt, bix, biy = best
        p = grid.center(bix, biy)
        q = a_pt
        rho = rho_next
        j = AngleIndex(j + k_dir, M).j
        points.append(p)
        anchors.append(q)
        rays.append(j)

    return SpiralChain(
        square=square, M=M, points=points, anchors=anchors, rays=rays,
        termination=termination, backtrack=backtrack,
    )


# ---------------------------------------------------------------------------
# Direct backtrack search
# ---------------------------------------------------------------------------


def _center_offset(square: DyadicSquare, angle: AngleIndex) -> float:
    nx, ny = angle.normal()
    c = square.center
    return (c.x - CENTER_X) * nx + (c.y - CENTER_Y) * ny


def _candidate_lines(square: DyadicSquare, M: int, w_loc: float) -> list[DiscreteLine]:
    """Candidate lines in preference order.

    Axis-aligned center lines come first (same-scale squares then share
    collinear lines, which lets a single sampled line pass whole rows or
    columns), then slightly shifted axis lines, then the center lines of
    the remaining angles, then further shifts.
    """
    axis = [AngleIndex(M, M), AngleIndex(M // 4, M)]
    rest = [
        AngleIndex(j, M)
        for j in range(1, M + 1)
        if j not in (M, M // 4, M // 2, 3 * M // 4)
    ]
    lim = square.side / 2.0
    out = [DiscreteLine(a, _center_offset(square, a)) for a in axis]
    for sh in (w_loc, -w_loc):
        if abs(sh) < lim:
            out.extend(DiscreteLine(a, _center_offset(square, a) + sh) for a in axis)
    out.extend(DiscreteLine(a, _center_offset(square, a)) for a in rest)
    for k in range(2, 7):
        for sh in (k * w_loc, -k * w_loc):
            if abs(sh) >= lim:
                continue
            out.extend(DiscreteLine(a, _center_offset(square, a) + sh) for a in axis)
    for a in rest:
        base = _center_offset(square, a)
        for sh in (w_loc, -w_loc, 2 * w_loc, -2 * w_loc):
            if abs(sh) < lim:
                out.append(DiscreteLine(a, base + sh))
    return out


def _usable_span(
    square: DyadicSquare, line: DiscreteLine, halfwidth: float
) -> Optional[tuple[float, float]]:
    """Projections s for which the point at s with a +-halfwidth normal bar
    stays inside the square; rectangles with both ends in this span cannot
    poke a corner out."""
    dx, dy = line.direction()
    nx, ny = line.normal()
    anchor = line.anchor()
    x0, y0, x1, y1 = square.aabb()
    lo, hi = -math.inf, math.inf
    # halfplane constraints e.x <= b for the square
    constraints = (((-1.0, 0.0), -x0), ((1.0, 0.0), x1), ((0.0, -1.0), -y0), ((0.0, 1.0), y1))
    for (ex, ey), b in constraints:
        for sigma in (halfwidth, -halfwidth):
            coeff = dx * ex + dy * ey
            rhs = b - ((anchor.x + sigma * nx) * ex + (anchor.y + sigma * ny) * ey)
            if abs(coeff) <= TOL:
                if rhs < -TOL:
                    return None
                continue
            if coeff > 0:
                hi = min(hi, rhs / coeff)
            else:
                lo = max(lo, rhs / coeff)
    if lo > hi:
        return None
    return lo, hi


def _bump_east(lo: float, hi: float, start: float, length: float,
               forbidden: list[float], margin: float) -> Optional[float]:
    """Leftmost interval start >= `start` avoiding all forbidden projections."""
    s = max(start, lo)
    for f in forbidden:  # ascending
        if f < s - margin:
            continue
        if f <= s + length + margin:
            s = f + margin
    return s if s + length <= hi else None


def _bump_west(lo: float, hi: float, end: float, length: float,
               forbidden: list[float], margin: float) -> Optional[float]:
    """Rightmost interval start with the interval ending <= `end`."""
    s = min(end, hi) - length
    for f in reversed(forbidden):  # descending
        if f > s + length + margin:
            continue
        if f >= s - margin:
            s = f - margin - length
    return s if s >= lo else None


def _search_line(
    oracle: OrderOracle,
    square: DyadicSquare,
    params: Params,
    line: DiscreteLine,
    max_pivots: int,
) -> Optional[Backtrack]:
    """Look for a backtrack along one candidate line.

    Pivot candidates stream in ascending order over the strip core. Every
    streamed cell precedes the current candidate, so rectangles are valid
    exactly when they avoid the already-streamed cells; only cells in the
    inner half of the strip can sit inside a rectangle, so only those are
    recorded as forbidden projections.
    """
    grid = oracle.grid
    h = square.side
    l_loc = params.l * h
    w_loc = params.w * h
    pad = 2.0 * grid.spacing
    margin = 0.5 * grid.spacing  # projection slack when avoiding a cell
    span = _usable_span(square, line, w_loc / 2.0)
    if span is None:
        return None
    lo, hi = span[0] + TOL, span[1] - TOL
    if hi - lo < 2.0 * (l_loc + pad):
        return None
    dvec = line.direction()
    anchor = line.anchor()
    region = StripRegion(line, halfwidth=w_loc, bounds=square.aabb(), span=(lo, hi))
    # only cells a rectangle could contain need avoiding
    band = w_loc / 2.0 * (1.0 + 1e-9) + TOL
    forbidden: list[float] = []
    stream = oracle.stream_cells_ascending(region)
    attempts = 0
    stream_budget = max(1024, 8 * int(l_loc / grid.spacing) + 64)
    for _ in range(stream_budget):
        item = next(stream, None)
        if item is None:
            return None
        key, cix, ciy = item
        p = grid.center(cix, ciy)
        pp = (p.x - anchor.x) * dvec[0] + (p.y - anchor.y) * dvec[1]
        roomy = lo + pad + l_loc <= pp <= hi - pad - l_loc
        if roomy:
            attempts += 1
            east = _bump_east(lo, hi, pp + pad, l_loc, forbidden, margin)
            west = _bump_west(lo, hi, pp - pad, l_loc, forbidden, margin)
            placeable = (
                east is not None and west is not None
                and east >= pp + pad - TOL and west + l_loc <= pp - pad + TOL
            )
            if placeable:
                rects = []
                for start in (east, west):
                    mid = start + l_loc / 2.0
                    cpt = Point(anchor.x + mid * dvec[0], anchor.y + mid * dvec[1])
                    rects.append(
                        OrientedRect(center=cpt, angle=line.angle, length=l_loc, width=w_loc)
                    )
                good = True
                for rect in rects:
                    ix, iy = _cells_in_rect(grid, rect)
                    if ix.size == 0 or (oracle.keys(ix, iy) <= key).any():
                        good = False
                        break
                if good:
                    return Backtrack(
                        p=p, line=line, strip=Strip(line, w_loc), r1=rects[0], r2=rects[1],
                        square=square, scale=square.scale,
                    )
            if attempts >= max_pivots:
                return None
        if point_line_distance(p, line) <= band:
            bisect.insort(forbidden, pp)
    return None


def _direct_backtrack(
    oracle: OrderOracle, square: DyadicSquare, params: Params, max_pivots: int = 96
) -> Optional[Backtrack]:
    """Strip search over candidate lines with full placement freedom."""
    w_loc = params.w * square.side
    for line in _candidate_lines(square, params.M, w_loc):
        bt = _search_line(oracle, square, params, line, max_pivots)
        if bt is not None:
            return bt
    return None


def find_backtrack(
    oracle: OrderOracle, square: DyadicSquare, params: Params
) -> Optional[Backtrack]:
    bt, _ = find_backtrack_with_chain(oracle, square, params)
    return bt


def find_backtrack_with_chain(
    oracle: OrderOracle, square: DyadicSquare, params: Params
) -> tuple[Optional[Backtrack], Optional[SpiralChain]]:
    """Spiral search first; in full mode fall back to the direct search."""
    if params.search == "direct":
        bt = _direct_backtrack(oracle, square, params)
        if bt is not None:
            verify_backtrack(oracle, bt)
        return bt, None
    chain = spiral_chain(oracle, square, params)
    bt = chain.backtrack
    if bt is None and params.search == "full":
        bt = _direct_backtrack(oracle, square, params)
    if bt is not None:
        verify_backtrack(oracle, bt)
    return bt, chain


# ---------------------------------------------------------------------------
# Atlas
# ---------------------------------------------------------------------------


@dataclass
class BacktrackAtlas:
    """One chosen backtrack per dyadic square over the requested scales."""

    oracle: OrderOracle
    params: Params
    scales: tuple[int, ...]
    backtracks: dict = field(default_factory=dict)
    chains: dict = field(default_factory=dict)
    uncovered: list = field(default_factory=list)

    @property
    def full_coverage(self) -> bool:
        return not self.uncovered


def build_atlas(
    oracle: OrderOracle,
    params: Params,
    scales: Optional[Sequence[int]] = None,
    budget: int = ATLAS_BUDGET,
) -> BacktrackAtlas:
    scale_list = sorted(set(params.scales() if scales is None else scales))
    total = sum(1 << (2 * t) for t in scale_list)
    if total > budget:
        raise BudgetError(f"atlas over scales {scale_list} needs {total} squares")
    atlas = BacktrackAtlas(oracle=oracle, params=params, scales=tuple(scale_list))
    for t in scale_list:
        params.check_resolution(t)
        for sq in dyadic_squares(t):
            bt, chain = find_backtrack_with_chain(oracle, sq, params)
            key = (t, sq.ix, sq.iy)
            if bt is None:
                atlas.uncovered.append(key)
                atlas.chains[key] = chain if chain is not None else spiral_chain(oracle, sq, params)
            else:
                atlas.backtracks[key] = bt
    return atlas


# ---------------------------------------------------------------------------
# Zig-zag sets from completed chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZigzagResult:
    points: list[Point]
    report: RatioReport
    outcome: DichotomyOutcome
    scenario: int  # 1 = zig-zag, 2 = confined
    tour_length: float
    truncated_walk: bool


def zigzag_set(oracle: OrderOracle, chain: SpiralChain, params: Params) -> ZigzagResult:
    """Extract an adversarial set from a long chain via the walk dichotomy."""
    s = params.s
    need = 7 * s ** 3
    if chain.k < need:
        raise ParameterError(
            f"chain of length {chain.k} is too short for zig-zag extraction"
            f" (needs {need})"
        )
    truncated = chain.k < params.M * params.M
    walk = CycleWalk(M=params.M, values=np.asarray(chain.rays, np.int64) % params.M)
    outcome = dichotomy(walk, s)
    center = chain.square.center

    def radius(p: Point) -> float:
        return dist(p, center)

    if isinstance(outcome, ZigZag):
        m_cap = max(1, params.M // s)
        m = min(outcome.m, m_cap)
        idx = sorted(
            set(int(i) for i in outcome.i_times[:m]) | set(int(j) for j in outcome.j_times[:m])
        )
        pts = [chain.points[i] for i in idx]
        groups: dict[int, list[Point]] = {}
        for i in idx:
            groups.setdefault(int(walk.values[i]), []).append(chain.points[i])
        tour: list[Point] = []
        for gi, (val, members) in enumerate(sorted(groups.items())):
            members = sorted(members, key=radius)
            tour.extend(members if gi % 2 == 0 else members[::-1])
        tour_len = tsp_upper_tour(pts, tour)
        scenario = 1
    else:
        idx = sorted(
            {int(i) for i in outcome.visits}
            | {int(i) + 1 for i in outcome.visits if int(i) + 1 < chain.k}
        )
        pts = [chain.points[i] for i in idx]
        tour_len = tsp_upper_tour(pts, pts)  # chain-index order
        scenario = 2
    report = measure_order_ratio(oracle, pts, tsp_upper_override=tour_len)
    return ZigzagResult(
        points=pts, report=report, outcome=outcome, scenario=scenario,
        tour_length=tour_len, truncated_walk=truncated,
    )


# ---------------------------------------------------------------------------
# Random lines and backtracking sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineSample:
    line: DiscreteLine
    seed: int
    index: int


def admissible_halfspan(angle: AngleIndex) -> float:
    """Largest |offset| for which a line of this angle meets the unit square."""
    dx, dy = angle.direction()
    return (abs(dx) + abs(dy)) / 2.0


def sample_lines(M: int, n: int, seed: int) -> list[LineSample]:
    """Uniform angle index, then uniform offset over the admissible interval."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        j = int(rng.integers(1, M + 1))
        angle = AngleIndex(j, M)
        half = admissible_halfspan(angle)
        off = float(rng.uniform(-half, half))
        out.append(LineSample(DiscreteLine(angle, off), seed, i))
    return out


def sample_line(M: int, seed: int) -> LineSample:
    return sample_lines(M, 1, seed)[0]


def _pass_prefilter(line: DiscreteLine, bt: Backtrack) -> bool:
    """Sound necessary condition for passing, cheap enough for hot loops.

    A certified pivot projects into the interior of its own clipped line,
    so when the sampled line passes, dist(p, line) < w*2^-t + eps.
    """
    limit = 1.5 * bt.strip.halfwidth + 1e-12
    return point_line_distance(bt.p, line) <= limit


def passes_through(line: DiscreteLine | LineSample, bt: Backtrack) -> bool:
    """Two-sided Hausdorff proximity of the clipped lines inside the square."""
    if isinstance(line, LineSample):
        line = line.line
    eps = bt.strip.halfwidth / 2.0
    clip_a = clip_line_to_square(line, bt.square)
    if clip_a is None:
        return False
    clip_b = clip_line_to_square(bt.line, bt.square)
    if clip_b is None:
        return False
    # cheap exact rejection: an endpoint farther than eps from the other's
    # infinite line is farther from its clipped segment too
    for p_end, other in ((clip_a.a, bt.line), (clip_a.b, bt.line), (clip_b.a, line), (clip_b.b, line)):
        if point_line_distance(p_end, other) > eps:
            return False
    return segment_hausdorff_within(clip_a, clip_b, eps)


@dataclass(frozen=True)
class BacktrackingSet:
    """A sampled line, the squares it passes through, and the certified set."""

    line: LineSample
    bad: dict
    points: list[Point]
    sigma: float
    per_scale_weight: dict
    tour_length: float
    tour_bound: float
    cost_order: float
    cost_bound_rhs: float
    report: RatioReport
    max_normal_dist: float

    @property
    def tour_slack(self) -> float:
        return self.tour_bound - self.tour_length

    @property
    def cost_slack(self) -> float:
        return (2.0 * self.cost_order + 1.0) - self.cost_bound_rhs


def backtracking_set(atlas: BacktrackAtlas, line: LineSample, params: Params) -> BacktrackingSet:
    for key in atlas.uncovered:
        if key[0] in atlas.scales:
            raise CoverageError(
                f"square scale={key[0]} ix={key[1]} iy={key[2]} has no backtrack;"
                " the construction redirects to the zig-zag case"
            )
    bad: dict = {t: [] for t in atlas.scales}
    pts: list[Point] = []
    seen_cells = set()
    max_nd = 0.0
    geom = line.line
    for (t, ix, iy), bt in atlas.backtracks.items():
        if _pass_prefilter(geom, bt) and passes_through(geom, bt):
            bad[t].append((ix, iy))
            cell = atlas.oracle.grid.snap(bt.p)
            max_nd = max(max_nd, point_line_distance(bt.p, geom) / 2.0 ** (-t))
            if cell not in seen_cells:
                seen_cells.add(cell)
                pts.append(bt.p)
    weights = {t: len(bad[t]) * 2.0 ** (-t) for t in atlas.scales}
    sigma = sum(weights.values())

    dx, dy = geom.direction()
    anchor = geom.anchor()
    order = sorted(pts, key=lambda p: (p.x - anchor.x) * dx + (p.y - anchor.y) * dy)
    tour_len = tsp_upper_tour(pts, order) if len(pts) >= 2 else 0.0
    tour_bound = math.sqrt(2.0) + 4.0 * params.w * sigma

    cost = cost_under_order(atlas.oracle, pts) if pts else 0.0
    rhs = params.l * sum(
        weights[t] - 18.0 / (2.0 ** params.c) for t in atlas.scales
    )
    report = (
        measure_order_ratio(atlas.oracle, pts, tsp_upper_override=tour_len or None)
        if pts
        else RatioReport(n=0, cost_order=0.0, tsp_lower=0.0, tsp_upper=0.0,
                         tsp_exact=0.0, ratio_defined=False)
    )
    return BacktrackingSet(
        line=line, bad=bad, points=pts, sigma=sigma, per_scale_weight=weights,
        tour_length=tour_len, tour_bound=tour_bound, cost_order=cost,
        cost_bound_rhs=rhs, report=report, max_normal_dist=max_nd,
    )


@dataclass(frozen=True)
class SigmaEstimate:
    mean: float
    std_error: float
    n_samples: int
    single_scale_bound: Optional[float] = None


def estimate_sigma_expectation(
    atlas: BacktrackAtlas, params: Params, n_samples: int, seed: int
) -> SigmaEstimate:
    """Monte Carlo mean of the weighted pass count over random lines."""
    lines = sample_lines(params.M, n_samples, seed)
    vals = np.zeros(n_samples)
    entries = list(atlas.backtracks.items())
    for i, ls in enumerate(lines):
        total = 0.0
        for (t, _, _), bt in entries:
            if _pass_prefilter(ls.line, bt) and passes_through(ls.line, bt):
                total += 2.0 ** (-t)
        vals[i] = total
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else float("inf")
    bound = None
    if tuple(atlas.scales) == (0,) and atlas.full_coverage:
        bound = params.w / (2.0 * params.M)
    return SigmaEstimate(mean=mean, std_error=se, n_samples=n_samples, single_scale_bound=bound)


# ---------------------------------------------------------------------------
# Case dichotomy driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackReport:
    case: str  # "A" | "B-zigzag" | "B-confined" | "inconclusive"
    oracle_label: str
    params: Params
    n_lines: int
    seed: int
    report: Optional[RatioReport]
    points: list[Point]
    detail: dict

    def to_dict(self) -> dict:
        out = {
            "case": self.case,
            "oracle": self.oracle_label,
            "params": self.params.to_dict(),
            "n_lines": self.n_lines,
            "seed": self.seed,
            "n": len(self.points),
            "report": self.report.to_dict() if self.report else None,
        }
        out.update(self.detail)
        return out


def run_case_dichotomy(
    oracle: OrderOracle,
    params: Params,
    scales: Optional[Sequence[int]] = None,
    n_lines: int = 256,
    seed: int = 0,
) -> AttackReport:
    """Build the atlas and emit the winning adversarial construction."""
    if n_lines < 1:
        raise ParameterError(f"need at least one sampled line, got {n_lines}")
    atlas = build_atlas(oracle, params, scales=scales)
    if not atlas.full_coverage:
        key = atlas.uncovered[0]
        chain = atlas.chains[key]
        if chain.k >= 7 * params.s ** 3:
            zz = zigzag_set(oracle, chain, params)
            case = "B-zigzag" if zz.scenario == 1 else "B-confined"
            detail = {
                "square": list(key),
                "chain_length": chain.k,
                "tour_length": zz.tour_length,
                "truncated_walk": zz.truncated_walk,
            }
            return AttackReport(
                case=case, oracle_label=oracle.label, params=params,
                n_lines=0, seed=seed, report=zz.report, points=zz.points,
                detail=detail,
            )
        return AttackReport(
            case="inconclusive", oracle_label=oracle.label, params=params,
            n_lines=0, seed=seed, report=None, points=[],
            detail={"square": list(key), "chain_length": chain.k,
                    "reason": "uncovered square's chain is too short"},
        )

    lines = sample_lines(params.M, n_lines, seed)
    best: Optional[BacktrackingSet] = None
    min_tour_slack = math.inf
    min_cost_slack = math.inf
    for ls in lines:
        bs = backtracking_set(atlas, ls, params)
        min_tour_slack = min(min_tour_slack, bs.tour_slack)
        min_cost_slack = min(min_cost_slack, bs.cost_slack)
        score = bs.report.ratio_lower if bs.report.ratio_defined else None
        best_score = (
            best.report.ratio_lower if best is not None and best.report.ratio_defined else None
        )
        if best is None or (score or 0.0) > (best_score or 0.0):
            best = bs
    assert best is not None
    detail = {
        "line_angle": best.line.line.angle.j,
        "line_offset": best.line.line.offset,
        "line_index": best.line.index,
        "sigma": best.sigma,
        "tour_length": best.tour_length,
        "tour_bound": best.tour_bound,
        "cost_bound_rhs": best.cost_bound_rhs,
        "min_tour_slack": min_tour_slack,
        "min_cost_slack": min_cost_slack,
        "bad_counts": {str(t): len(best.bad[t]) for t in atlas.scales},
    }
    return AttackReport(
        case="A", oracle_label=oracle.label, params=params, n_lines=n_lines,
        seed=seed, report=best.report, points=best.points, detail=detail,
    )
