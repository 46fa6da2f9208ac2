"""Planar primitives on the unit square with a discrete set of slopes.

All values are immutable after construction and every operation is pure.
Lines are parametrized by (angle index, signed offset from the square
center), which keeps the representation uniform across angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BudgetError, ParameterError

TOL = 1e-12  # comparison tolerance for incidence tests
CENTER_X = 0.5
CENTER_Y = 0.5

SQUARE_BUDGET = 4 ** 12  # largest dyadic partition that may be enumerated


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


def dist(a: Point, b: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class AngleIndex:
    """One of M discrete directions; index j realizes the angle j*2*pi/M.

    Indices are kept in the canonical range {1, ..., M} and all index
    arithmetic wraps cyclically.
    """

    j: int
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError(f"angle count M must be positive, got {self.M}")
        jj = self.j % self.M
        object.__setattr__(self, "j", self.M if jj == 0 else jj)

    @property
    def theta(self) -> float:
        return 2.0 * math.pi * self.j / self.M

    def direction(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    def normal(self) -> tuple[float, float]:
        """Left-hand unit normal of the direction vector."""
        return (-math.sin(self.theta), math.cos(self.theta))

    def shifted(self, k: int) -> "AngleIndex":
        return AngleIndex(self.j + k, self.M)

    def perpendicular(self) -> "AngleIndex":
        if self.M % 4 != 0:
            raise ParameterError(
                f"perpendicular angle needs M divisible by 4, got M={self.M}"
            )
        return self.shifted(self.M // 4)

    def parallel_to(self, other: "AngleIndex") -> bool:
        """True when the two directions span the same line (up to sign)."""
        if self.M == other.M:
            return (self.j - other.j) % (self.M // 2 if self.M % 2 == 0 else self.M) == 0
        d1, d2 = self.direction(), other.direction()
        return abs(d1[0] * d2[1] - d1[1] * d2[0]) <= TOL


@dataclass(frozen=True)
class DiscreteLine:
    """Infinite line with a discrete slope, at a signed distance from (1/2, 1/2)."""

    angle: AngleIndex
    offset: float

    def direction(self) -> tuple[float, float]:
        return self.angle.direction()

    def normal(self) -> tuple[float, float]:
        return self.angle.normal()

    def anchor(self) -> Point:
        """A concrete point on the line (the foot of the center's projection)."""
        nx, ny = self.normal()
        return Point(CENTER_X + self.offset * nx, CENTER_Y + self.offset * ny)

    @staticmethod
    def through_point(p: Point, angle: AngleIndex) -> "DiscreteLine":
        nx, ny = angle.normal()
        off = (p.x - CENTER_X) * nx + (p.y - CENTER_Y) * ny
        return DiscreteLine(angle, off)


def point_line_distance(q: Point, line: DiscreteLine) -> float:
    """Perpendicular distance from a point to the infinite line."""
    nx, ny = line.normal()
    return abs((q.x - CENTER_X) * nx + (q.y - CENTER_Y) * ny - line.offset)


@dataclass(frozen=True)
class Strip:
    """Closed neighborhood of a line: all points within `halfwidth` of it."""

    line: DiscreteLine
    halfwidth: float

    def __post_init__(self):
        if self.halfwidth <= 0:
            raise ParameterError(f"strip halfwidth must be positive, got {self.halfwidth}")

    def contains(self, q: Point) -> bool:
        return point_line_distance(q, self.line) <= self.halfwidth


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle given by center of mass, long-axis direction, length and width."""

    center: Point
    angle: AngleIndex
    length: float
    width: float

    def __post_init__(self):
        if self.width > self.length + TOL:
            raise ParameterError(
                f"rect width {self.width} exceeds length {self.length}"
            )

    def contains(self, q: Point) -> bool:
        ax, ay = self.angle.direction()
        dx, dy = q.x - self.center.x, q.y - self.center.y
        return (
            abs(dx * ax + dy * ay) <= self.length / 2.0
            and abs(-dx * ay + dy * ax) <= self.width / 2.0
        )

    def contains_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        ax, ay = self.angle.direction()
        dx, dy = xs - self.center.x, ys - self.center.y
        along = np.abs(dx * ax + dy * ay)
        across = np.abs(-dx * ay + dy * ax)
        return (along <= self.length / 2.0) & (across <= self.width / 2.0)

    def corners(self) -> list[Point]:
        ax, ay = self.angle.direction()
        nx, ny = -ay, ax
        out = []
        for sa, sn in ((1, 1), (1, -1), (-1, -1), (-1, 1)):
            out.append(
                Point(
                    self.center.x + sa * ax * self.length / 2 + sn * nx * self.width / 2,
                    self.center.y + sa * ay * self.length / 2 + sn * ny * self.width / 2,
                )
            )
        return out

    def aabb(self) -> tuple[float, float, float, float]:
        cs = self.corners()
        xs = [c.x for c in cs]
        ys = [c.y for c in cs]
        return (min(xs), min(ys), max(xs), max(ys))


def rect_contains(rect: OrientedRect, q: Point) -> bool:
    return rect.contains(q)


@dataclass(frozen=True)
class Ray:
    """Half-line from an origin in a discrete direction."""

    origin: Point
    angle: AngleIndex

    def point_at(self, radius: float) -> Point:
        dx, dy = self.angle.direction()
        return Point(self.origin.x + radius * dx, self.origin.y + radius * dy)


def point_ray_distance(q: Point, ray: Ray) -> float:
    dx, dy = ray.angle.direction()
    vx, vy = q.x - ray.origin.x, q.y - ray.origin.y
    t = vx * dx + vy * dy
    if t <= 0.0:
        return math.hypot(vx, vy)
    return math.hypot(vx - t * dx, vy - t * dy)


@dataclass(frozen=True)
class DyadicSquare:
    """Square of side 2^-t in the standard 2^t x 2^t partition of [0,1]^2."""

    scale: int
    ix: int
    iy: int

    def __post_init__(self):
        if self.scale < 0:
            raise ParameterError(f"scale must be >= 0, got {self.scale}")
        n = 1 << self.scale
        if not (0 <= self.ix < n and 0 <= self.iy < n):
            raise ParameterError(
                f"square index ({self.ix},{self.iy}) out of range for scale {self.scale}"
            )

    @property
    def side(self) -> float:
        return 2.0 ** (-self.scale)

    @property
    def x0(self) -> float:
        return self.ix * self.side

    @property
    def y0(self) -> float:
        return self.iy * self.side

    def aabb(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x0 + self.side, self.y0 + self.side)

    @property
    def center(self) -> Point:
        return Point(self.x0 + self.side / 2, self.y0 + self.side / 2)

    def contains(self, p: Point, tol: float = 0.0) -> bool:
        x0, y0, x1, y1 = self.aabb()
        return x0 - tol <= p.x <= x1 + tol and y0 - tol <= p.y <= y1 + tol

    def tripled_aabb(self) -> tuple[float, float, float, float]:
        """Concentric tripled square, clipped to the unit square."""
        s = self.side
        return (
            max(0.0, self.x0 - s),
            max(0.0, self.y0 - s),
            min(1.0, self.x0 + 2 * s),
            min(1.0, self.y0 + 2 * s),
        )

    def to_local(self, p: Point) -> Point:
        return Point((p.x - self.x0) / self.side, (p.y - self.y0) / self.side)

    def from_local(self, u: Point) -> Point:
        return Point(self.x0 + u.x * self.side, self.y0 + u.y * self.side)


def dyadic_squares(t: int, budget: int = SQUARE_BUDGET) -> list[DyadicSquare]:
    """Full partition of the unit square at scale t, each square listed once."""
    if t < 0:
        raise ParameterError(f"scale must be >= 0, got {t}")
    count = 1 << (2 * t)
    if count > budget:
        raise BudgetError(f"scale {t} needs {count} squares, budget is {budget}")
    n = 1 << t
    return [DyadicSquare(t, ix, iy) for iy in range(n) for ix in range(n)]


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point

    def length(self) -> float:
        return dist(self.a, self.b)

    def midpoint(self) -> Point:
        return Point((self.a.x + self.b.x) / 2, (self.a.y + self.b.y) / 2)


def point_segment_distance(q: Point, seg: Segment) -> float:
    ax, ay = seg.a.x, seg.a.y
    bx, by = seg.b.x, seg.b.y
    ux, uy = bx - ax, by - ay
    denom = ux * ux + uy * uy
    if denom <= TOL * TOL:
        return math.hypot(q.x - ax, q.y - ay)
    t = ((q.x - ax) * ux + (q.y - ay) * uy) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(q.x - (ax + t * ux), q.y - (ay + t * uy))


def segment_hausdorff(a: Segment, b: Segment) -> float:
    """Hausdorff distance between two segments.

    The distance from a point moving along a segment to the other segment is
    convex, so each directed maximum is attained at an endpoint.
    """
    return max(
        point_segment_distance(a.a, b),
        point_segment_distance(a.b, b),
        point_segment_distance(b.a, a),
        point_segment_distance(b.b, a),
    )


def segment_hausdorff_within(a: Segment, b: Segment, eps: float) -> bool:
    """True iff every point of each segment is within eps of the other."""
    return segment_hausdorff(a, b) <= eps + TOL


def clip_line_to_aabb(
    line: DiscreteLine, box: tuple[float, float, float, float]
) -> Optional[Segment]:
    """Intersection of an infinite line with an axis-aligned box.

    Returns the (possibly degenerate) segment, or None when disjoint.
    """
    x0, y0, x1, y1 = box
    px, py = tuple(line.anchor())
    dx, dy = line.direction()
    tmin, tmax = -math.inf, math.inf
    for p, d, lo, hi in ((px, dx, x0, x1), (py, dy, y0, y1)):
        if abs(d) <= TOL:
            if p < lo - TOL or p > hi + TOL:
                return None
            continue
        t0 = (lo - p) / d
        t1 = (hi - p) / d
        if t0 > t1:
            t0, t1 = t1, t0
        tmin = max(tmin, t0)
        tmax = min(tmax, t1)
    if tmin > tmax + TOL:
        return None
    if not (math.isfinite(tmin) and math.isfinite(tmax)):
        return None
    return Segment(
        Point(px + tmin * dx, py + tmin * dy), Point(px + tmax * dx, py + tmax * dy)
    )


def clip_line_to_square(line: DiscreteLine, square: DyadicSquare) -> Optional[Segment]:
    return clip_line_to_aabb(line, square.aabb())


@dataclass(frozen=True)
class StripRegion:
    """Search region: the open strip core of a line, restricted to a box.

    Cell centers qualify when their perpendicular distance to the line is
    strictly below `halfwidth` and they lie inside `bounds`. An optional
    projection window restricts the admissible span along the line.
    """

    line: DiscreteLine
    halfwidth: float
    bounds: tuple[float, float, float, float]
    span: Optional[tuple[float, float]] = None  # closed window of projections

    def __post_init__(self):
        nx, ny = self.line.normal()
        dx, dy = self.line.direction()
        a = self.line.anchor()
        object.__setattr__(self, "_frame", (nx, ny, dx, dy, a.x, a.y))

    def _normal_value(self, x: float, y: float) -> float:
        nx, ny, _, _, _, _ = self._frame
        return (x - CENTER_X) * nx + (y - CENTER_Y) * ny - self.line.offset

    def projection(self, x: float, y: float) -> float:
        _, _, dx, dy, ax, ay = self._frame
        return (x - ax) * dx + (y - ay) * dy

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bounds
        if not (x0 - TOL <= x <= x1 + TOL and y0 - TOL <= y <= y1 + TOL):
            return False
        if abs(self._normal_value(x, y)) >= self.halfwidth:
            return False
        if self.span is not None:
            t = self.projection(x, y)
            if t < self.span[0] - TOL or t > self.span[1] + TOL:
                return False
        return True

    def may_intersect_aabb(self, box: tuple[float, float, float, float]) -> bool:
        """Conservative overlap test used for search pruning."""
        bx0, by0, bx1, by1 = box
        x0, y0, x1, y1 = self.bounds
        if bx1 < x0 - TOL or bx0 > x1 + TOL or by1 < y0 - TOL or by0 > y1 + TOL:
            return False
        corners = ((bx0, by0), (bx0, by1), (bx1, by0), (bx1, by1))
        vals = [self._normal_value(cx, cy) for cx, cy in corners]
        if min(vals) >= self.halfwidth or max(vals) <= -self.halfwidth:
            return False
        if self.span is not None:
            ts = [self.projection(cx, cy) for cx, cy in corners]
            if max(ts) < self.span[0] - TOL or min(ts) > self.span[1] + TOL:
                return False
        return True

    def may_intersect_hull(self, xs, ys) -> bool:
        """Conservative overlap test against a convex vertex set."""
        if max(xs) < self.bounds[0] - TOL or min(xs) > self.bounds[2] + TOL:
            return False
        if max(ys) < self.bounds[1] - TOL or min(ys) > self.bounds[3] + TOL:
            return False
        vals = [self._normal_value(x, y) for x, y in zip(xs, ys)]
        if min(vals) >= self.halfwidth or max(vals) <= -self.halfwidth:
            return False
        if self.span is not None:
            ts = [self.projection(x, y) for x, y in zip(xs, ys)]
            if max(ts) < self.span[0] - TOL or min(ts) > self.span[1] + TOL:
                return False
        return True
