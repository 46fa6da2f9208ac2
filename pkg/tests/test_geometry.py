import math

import numpy as np
import pytest

from utsp.errors import BudgetError, ParameterError
from utsp.geometry import (
    AngleIndex,
    DiscreteLine,
    DyadicSquare,
    OrientedRect,
    Point,
    Ray,
    Segment,
    clip_line_to_square,
    dist,
    dyadic_squares,
    point_line_distance,
    point_ray_distance,
    point_segment_distance,
    segment_hausdorff,
    segment_hausdorff_within,
)


def sample_segment(seg, n=1000):
    return [
        Point(seg.a.x + t * (seg.b.x - seg.a.x), seg.a.y + t * (seg.b.y - seg.a.y))
        for t in np.linspace(0.0, 1.0, n)
    ]


def hausdorff_by_sampling(a, b, n=1000):
    pa, pb = sample_segment(a, n), sample_segment(b, n)
    d_ab = max(min(dist(p, q) for q in pb) for p in pa)
    d_ba = max(min(dist(p, q) for q in pa) for p in pb)
    return max(d_ab, d_ba)


class TestDist:
    def test_identity(self):
        assert dist(Point(0, 0), Point(0, 0)) == 0.0

    def test_three_four_five(self):
        assert dist(Point(0, 0), Point(0.75, 1.0)) == pytest.approx(1.25, abs=0)

    def test_axis_aligned(self):
        assert dist(Point(0.25, 0.5), Point(0.5, 0.5)) == pytest.approx(0.25, abs=0)


class TestPointLineDistance:
    def test_incidence(self):
        line = DiscreteLine(AngleIndex(16, 16), 0.0)
        assert point_line_distance(Point(0.9, 0.5), line) == pytest.approx(0.0, abs=1e-15)

    def test_horizontal_offset(self):
        line = DiscreteLine(AngleIndex(16, 16), 0.0)  # y = 1/2
        d = 0.037
        assert point_line_distance(Point(0.5, 0.5 + d), line) == pytest.approx(d, abs=1e-15)

    def test_diagonal_against_dense_sampling(self):
        # 135-degree line through the center; distance from the origin
        line = DiscreteLine(AngleIndex(6, 16), 0.0)
        q = Point(0.0, 0.0)
        got = point_line_distance(q, line)
        # dense sampling of points on the line as an independent oracle
        dx, dy = line.direction()
        ts = np.linspace(-2.0, 2.0, 1 << 21)
        xs = 0.5 + ts * dx
        ys = 0.5 + ts * dy
        ref = np.sqrt((xs - q.x) ** 2 + (ys - q.y) ** 2).min()
        assert got == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert got == pytest.approx(ref, abs=1e-9)

    def test_translation_along_line_invariance(self, rng):
        for _ in range(200):
            j = int(rng.integers(1, 17))
            line = DiscreteLine(AngleIndex(j, 16), float(rng.uniform(-0.5, 0.5)))
            q = Point(float(rng.random()), float(rng.random()))
            dx, dy = line.direction()
            t = float(rng.uniform(-1, 1))
            q2 = Point(q.x + t * dx, q.y + t * dy)
            assert point_line_distance(q, line) == pytest.approx(
                point_line_distance(q2, line), abs=1e-12
            )


class TestOrientedRect:
    def test_center_membership(self):
        r = OrientedRect(Point(0.5, 0.5), AngleIndex(3, 16), 0.2, 0.1)
        assert r.contains(Point(0.5, 0.5))

    def test_beyond_half_length(self):
        r = OrientedRect(Point(0.5, 0.5), AngleIndex(16, 16), 0.2, 0.1)
        assert not r.contains(Point(0.5 + 0.2, 0.5))

    def test_axis_aligned_inequality(self):
        r = OrientedRect(Point(0.5, 0.5), AngleIndex(16, 16), 0.2, 0.1)
        assert r.contains(Point(0.58, 0.5))  # |0.08| <= 0.1 along, 0 across

    def test_against_rotation_oracle(self, rng):
        for _ in range(10_000):
            j = int(rng.integers(1, 17))
            rect = OrientedRect(
                Point(float(rng.random()), float(rng.random())),
                AngleIndex(j, 16),
                float(rng.uniform(0.05, 0.4)),
                float(rng.uniform(0.01, 0.05)),
            )
            q = Point(float(rng.random()), float(rng.random()))
            # rotate q into the rect frame by hand
            th = 2 * math.pi * j / 16
            dx, dy = q.x - rect.center.x, q.y - rect.center.y
            u = dx * math.cos(th) + dy * math.sin(th)
            v = -dx * math.sin(th) + dy * math.cos(th)
            want = abs(u) <= rect.length / 2 and abs(v) <= rect.width / 2
            assert rect.contains(q) == want

    def test_contains_many_matches_scalar(self, rng):
        rect = OrientedRect(Point(0.4, 0.6), AngleIndex(5, 16), 0.3, 0.08)
        xs = rng.random(500)
        ys = rng.random(500)
        got = rect.contains_many(xs, ys)
        want = np.asarray([rect.contains(Point(float(x), float(y))) for x, y in zip(xs, ys)])
        assert (got == want).all()

    def test_width_cannot_exceed_length(self):
        with pytest.raises(ParameterError):
            OrientedRect(Point(0.5, 0.5), AngleIndex(1, 16), 0.1, 0.2)


class TestClip:
    def test_full_horizontal_crossing(self):
        line = DiscreteLine(AngleIndex(16, 16), 0.0)
        seg = clip_line_to_square(line, DyadicSquare(0, 0, 0))
        ends = sorted([(seg.a.x, seg.a.y), (seg.b.x, seg.b.y)])
        assert ends[0] == pytest.approx((0.0, 0.5), abs=1e-12)
        assert ends[1] == pytest.approx((1.0, 0.5), abs=1e-12)

    def test_disjoint_diagonal(self):
        line = DiscreteLine(AngleIndex(2, 16), 0.75)  # 45 degrees, offset > sqrt(2)/2
        assert clip_line_to_square(line, DyadicSquare(0, 0, 0)) is None

    def test_scale_one_square_diagonal_length(self):
        line = DiscreteLine(AngleIndex(2, 16), 0.0)  # y = x
        seg = clip_line_to_square(line, DyadicSquare(1, 0, 0))
        # brute-force oracle: intersect the line with all 4 edges
        sq = DyadicSquare(1, 0, 0)
        x0, y0, x1, y1 = sq.aabb()
        cand = []
        for x in (x0, x1):
            if y0 - 1e-12 <= x <= y1 + 1e-12:  # y = x on vertical edge
                cand.append((x, x))
        for y in (y0, y1):
            if x0 - 1e-12 <= y <= x1 + 1e-12:
                cand.append((y, y))
        cand = sorted(set(cand))
        want = math.dist(cand[0], cand[-1])
        assert seg.length() == pytest.approx(want, abs=1e-12)
        assert seg.length() == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_clip_endpoints_on_line_random(self, rng):
        for _ in range(300):
            j = int(rng.integers(1, 17))
            line = DiscreteLine(AngleIndex(j, 16), float(rng.uniform(-0.7, 0.7)))
            seg = clip_line_to_square(line, DyadicSquare(0, 0, 0))
            if seg is None:
                continue
            for p in (seg.a, seg.b):
                assert point_line_distance(p, line) < 1e-9
                assert -1e-9 <= p.x <= 1 + 1e-9 and -1e-9 <= p.y <= 1 + 1e-9


class TestHausdorff:
    def test_equal_segments(self):
        s = Segment(Point(0.1, 0.2), Point(0.7, 0.9))
        assert segment_hausdorff_within(s, s, 0.0)

    def test_parallel_distance_exceeds(self):
        d = 0.1
        a = Segment(Point(0.0, 0.0), Point(1.0, 0.0))
        b = Segment(Point(0.0, d), Point(1.0, d))
        assert not segment_hausdorff_within(a, b, d / 2)
        assert segment_hausdorff_within(a, b, d)

    def test_offset_within_eps_dense_oracle(self):
        eps = 0.05
        a = Segment(Point(0.1, 0.1), Point(0.8, 0.6))
        # offset by 0.9*eps in the normal direction
        nx, ny = -(0.6 - 0.1), (0.8 - 0.1)
        nn = math.hypot(nx, ny)
        off = 0.9 * eps
        b = Segment(
            Point(0.1 + off * nx / nn, 0.1 + off * ny / nn),
            Point(0.8 + off * nx / nn, 0.6 + off * ny / nn),
        )
        assert segment_hausdorff_within(a, b, eps)
        assert segment_hausdorff(a, b) == pytest.approx(hausdorff_by_sampling(a, b), abs=1e-9)

    def test_symmetry_and_monotonicity(self, rng):
        for _ in range(100):
            pts = rng.random(8)
            a = Segment(Point(pts[0], pts[1]), Point(pts[2], pts[3]))
            b = Segment(Point(pts[4], pts[5]), Point(pts[6], pts[7]))
            h = segment_hausdorff(a, b)
            assert h == pytest.approx(segment_hausdorff(b, a), abs=0)
            assert segment_hausdorff_within(a, b, h + 1e-12)
            assert not segment_hausdorff_within(a, b, h - 1e-9) or h < 1e-9

    def test_matches_dense_sampling(self, rng):
        for _ in range(25):
            pts = rng.random(8)
            a = Segment(Point(pts[0], pts[1]), Point(pts[2], pts[3]))
            b = Segment(Point(pts[4], pts[5]), Point(pts[6], pts[7]))
            assert segment_hausdorff(a, b) == pytest.approx(
                hausdorff_by_sampling(a, b), abs=1e-5
            )


class TestDyadicSquares:
    def test_scale_zero(self):
        assert len(dyadic_squares(0)) == 1

    def test_scale_two_count(self):
        assert len(dyadic_squares(2)) == 16  # 2^(2t) squares at scale t

    def test_scale_three_partition(self):
        squares = dyadic_squares(3)
        assert len(squares) == 64
        assert sum(sq.side ** 2 for sq in squares) == pytest.approx(1.0, abs=0)
        boxes = [sq.aabb() for sq in squares]
        for i, b1 in enumerate(boxes):
            for b2 in boxes[i + 1 :]:
                ox = min(b1[2], b2[2]) - max(b1[0], b2[0])
                oy = min(b1[3], b2[3]) - max(b1[1], b2[1])
                assert ox <= 1e-12 or oy <= 1e-12  # no shared interior

    @pytest.mark.parametrize("t", [0, 1, 4, 8, 12])
    def test_unique_containing_square_on_fine_sample(self, t, rng):
        # arithmetic containment check; avoids enumerating 4^t squares
        n = 1 << t
        for _ in range(200):
            x, y = rng.random(2)
            ix, iy = min(n - 1, int(x * n)), min(n - 1, int(y * n))
            sq = DyadicSquare(t, ix, iy)
            assert sq.contains(Point(x, y))

    def test_budget(self):
        with pytest.raises(BudgetError):
            dyadic_squares(13)

    def test_tripled_square_clipped(self):
        assert DyadicSquare(1, 0, 0).tripled_aabb() == (0.0, 0.0, 1.0, 1.0)
        inner = DyadicSquare(2, 1, 1).tripled_aabb()
        assert inner == (0.0, 0.0, 0.75, 0.75)


class TestRaysAndAngles:
    def test_angle_normalization(self):
        assert AngleIndex(0, 16).j == 16
        assert AngleIndex(17, 16).j == 1
        assert AngleIndex(-1, 16).j == 15

    def test_perpendicular_requires_multiple_of_four(self):
        with pytest.raises(ParameterError):
            AngleIndex(1, 6).perpendicular()

    def test_point_ray_distance_behind_origin(self):
        ray = Ray(Point(0.5, 0.5), AngleIndex(16, 16))  # east
        assert point_ray_distance(Point(0.25, 0.5), ray) == pytest.approx(0.25)
        assert point_ray_distance(Point(0.75, 0.5), ray) == pytest.approx(0.0)

    def test_point_segment_distance_cases(self):
        seg = Segment(Point(0.0, 0.0), Point(1.0, 0.0))
        assert point_segment_distance(Point(0.5, 0.3), seg) == pytest.approx(0.3)
        assert point_segment_distance(Point(-0.4, 0.3), seg) == pytest.approx(0.5)
