import itertools

import numpy as np
import pytest

from utsp.errors import DuplicatePointError, OrderFileError, SnapError
from utsp.geometry import DiscreteLine, AngleIndex, Point, StripRegion
from utsp.orders import (
    CURVE_KINDS,
    GridSpec,
    OrderOracle,
    load_order_file,
    make_oracle,
    oracle_from_ranks,
)


def all_cells(g):
    n = 1 << g
    gx, gy = np.meshgrid(np.arange(n, dtype=np.int64), np.arange(n, dtype=np.int64))
    return gx.ravel(), gy.ravel()


def morton_reference(ix, iy, g):
    """Bit-interleave oracle built from binary strings."""
    bx = format(ix, f"0{g}b")
    by = format(iy, f"0{g}b")
    inter = "".join(a + b for a, b in zip(by, bx))
    return int(inter, 2)


def hilbert_reference_sequence(g):
    """Recursive quadrant enumerator, independent of the bit-twiddling code."""
    cells = []

    def walk(x0, y0, xi, xj, yi, yj, n):
        if n <= 0:
            cx = x0 + (xi + yi) // 2
            cy = y0 + (xj + yj) // 2
            cells.append((cx, cy))
            return
        walk(x0, y0, yi // 2, yj // 2, xi // 2, xj // 2, n - 1)
        walk(x0 + xi // 2, y0 + xj // 2, xi // 2, xj // 2, yi // 2, yj // 2, n - 1)
        walk(
            x0 + xi // 2 + yi // 2, y0 + xj // 2 + yj // 2,
            xi // 2, xj // 2, yi // 2, yj // 2, n - 1,
        )
        walk(
            x0 + xi // 2 + yi, y0 + xj // 2 + yj,
            -yi // 2, -yj // 2, -xi // 2, -xj // 2, n - 1,
        )

    walk(0, 0, 1 << g, 0, 0, 1 << g, g)
    # our curve is the reflection across the main diagonal of this one
    return [(y, x) for x, y in cells]


class TestGrid:
    def test_snap_accepts_centers(self):
        grid = GridSpec(3)
        assert grid.snap(grid.center(5, 2)) == (5, 2)

    def test_snap_rejects_off_grid(self):
        grid = GridSpec(3)
        with pytest.raises(SnapError):
            grid.snap(Point(0.5, 0.51))

    def test_nearest_cell_tie_toward_lower(self):
        grid = GridSpec(2)
        # 0.25 sits on the boundary between cells 0 and 1
        assert grid.nearest_cell(Point(0.25, 0.25)) == (0, 0)


class TestCurveKeys:
    def test_rowmajor_reading_order(self):
        o = make_oracle("rowmajor", 1)
        keys = [o.key_of_cell(ix, iy) for iy in (0, 1) for ix in (0, 1)]
        assert keys == [0, 1, 2, 3]

    def test_zorder_quadrant_order(self):
        o = make_oracle("zorder", 1)
        visit = sorted(((0, 0), (1, 0), (0, 1), (1, 1)), key=lambda c: o.key_of_cell(*c))
        assert visit == [(0, 0), (1, 0), (0, 1), (1, 1)]

    @pytest.mark.parametrize("g", [1, 2, 3, 4])
    def test_zorder_matches_bit_interleave_oracle(self, g):
        o = make_oracle("zorder", g)
        ix, iy = all_cells(g)
        keys = o.keys(ix, iy)
        for x, y, k in zip(ix, iy, keys):
            assert int(k) == morton_reference(int(x), int(y), g)

    @pytest.mark.parametrize("g", [1, 2, 3, 4, 5])
    def test_hilbert_matches_recursive_reference(self, g):
        o = make_oracle("hilbert", g)
        ref = hilbert_reference_sequence(g)
        for d, (x, y) in enumerate(ref):
            assert o.key_of_cell(x, y) == d

    def test_hilbert_path_adjacency_g2(self):
        o = make_oracle("hilbert", 2)
        ix, iy = all_cells(2)
        order = np.argsort(o.keys(ix, iy))
        xs, ys = ix[order], iy[order]
        steps = np.abs(np.diff(xs)) + np.abs(np.diff(ys))
        assert (steps == 1).all()

    @pytest.mark.parametrize("kind", ["rowmajor", "zorder", "hilbert"])
    @pytest.mark.parametrize("g", [1, 2, 4, 6, 8])
    def test_keys_bijection(self, kind, g):
        o = make_oracle(kind, g)
        ix, iy = all_cells(g)
        keys = np.sort(o.keys(ix, iy))
        assert np.array_equal(keys, np.arange((1 << g) ** 2))

    @pytest.mark.parametrize("g", [1, 2, 4, 6, 8])
    def test_sierpinski_rank_bijection(self, g):
        o = make_oracle("sierpinski", g)
        ix, iy = all_cells(g)
        raw = o.keys(ix, iy)
        assert len(np.unique(raw)) == raw.size  # injective first-entry indices
        ranks = sorted(o.curve_key(o.grid.center(int(x), int(y))) for x, y in zip(ix, iy))
        assert ranks == list(range((1 << g) ** 2))

    @pytest.mark.parametrize("g", range(1, 7))
    def test_hilbert_edge_adjacency(self, g):
        o = make_oracle("hilbert", g)
        ix, iy = all_cells(g)
        order = np.argsort(o.keys(ix, iy))
        xs, ys = ix[order], iy[order]
        assert (np.abs(np.diff(xs)) + np.abs(np.diff(ys)) == 1).all()

    @pytest.mark.parametrize("g", range(1, 7))
    def test_sierpinski_vertex_adjacency(self, g):
        o = make_oracle("sierpinski", g)
        ix, iy = all_cells(g)
        order = np.argsort(o.keys(ix, iy))
        xs, ys = ix[order], iy[order]
        cheb = np.maximum(np.abs(np.diff(xs)), np.abs(np.diff(ys)))
        assert (cheb == 1).all()

    @pytest.mark.parametrize("kind", ["zorder", "hilbert"])
    @pytest.mark.parametrize("g", range(1, 6))
    def test_block_refinement(self, kind, g):
        """Descendants of the k-th cell occupy exactly [4k, 4k+4) one level down."""
        o1, o2 = make_oracle(kind, g), make_oracle(kind, g + 1)
        n = 1 << g
        for iy in range(n):
            for ix in range(n):
                k = o1.key_of_cell(ix, iy)
                kids = sorted(
                    o2.key_of_cell(2 * ix + dx, 2 * iy + dy)
                    for dx in (0, 1)
                    for dy in (0, 1)
                )
                assert kids == [4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3]

    @pytest.mark.parametrize("g", [2, 3, 4])
    def test_sierpinski_descent_depth_stability(self, g):
        """Comparing two fixed points is unchanged under deeper bisection.

        This is the first-preimage semantics: once two points separate in
        the triangle tree, further refinement cannot reorder them. Checked
        by re-running the descent with the grid embedded at finer depths.
        """
        o = make_oracle("sierpinski", g)
        ix, iy = all_cells(g)
        base = o.keys(ix, iy)
        for extra in (1, 2, 3):
            fine = make_oracle("sierpinski", g + extra)
            scale = 1 << extra
            half = scale // 2
            # embed each center into the finer grid: with an odd scale factor
            # multiply indices; centers of g-cells are not fine centers, so
            # compare via the center's containing fine cells on the diagonal
            fine_keys = []
            for x, y in zip(ix, iy):
                # the four fine cells around the coarse center; the coarse
                # center's first-entry time is the min of their entries
                cands = []
                for dx in (-1, 0):
                    for dy in (-1, 0):
                        fx = int(x) * scale + half + dx
                        fy = int(y) * scale + half + dy
                        cands.append(fine.key_of_cell(fx, fy))
                fine_keys.append(min(cands))
            order_base = np.argsort(base, kind="stable")
            order_fine = np.argsort(np.asarray(fine_keys), kind="stable")
            assert np.array_equal(order_base, order_fine)


class TestCompareAndSort:
    def test_equal_iff_same_cell(self):
        o = make_oracle("hilbert", 3)
        p = o.grid.center(2, 5)
        assert o.compare(p, p) == 0

    def test_rowmajor_reading_comparison(self):
        o = make_oracle("rowmajor", 1)
        assert o.compare(Point(0.25, 0.25), Point(0.75, 0.25)) == -1

    @pytest.mark.parametrize("kind", CURVE_KINDS)
    def test_antisymmetry_sweep(self, kind, rng):
        o = make_oracle(kind, 6)
        n = o.grid.n
        for _ in range(2500):
            a = o.grid.center(int(rng.integers(n)), int(rng.integers(n)))
            b = o.grid.center(int(rng.integers(n)), int(rng.integers(n)))
            assert o.compare(a, b) == -o.compare(b, a)

    def test_total_order_axioms_exhaustive_g1(self):
        for kind in CURVE_KINDS:
            o = make_oracle(kind, 1)
            cells = [o.grid.center(ix, iy) for ix in range(2) for iy in range(2)]
            for a, b, c in itertools.product(cells, repeat=3):
                ab, bc, ac = o.compare(a, b), o.compare(b, c), o.compare(a, c)
                if ab <= 0 and bc <= 0:
                    assert ac <= 0  # transitivity
                if ab == 0:
                    assert (a.x, a.y) == (b.x, b.y) or o.compare(b, a) == 0

    def test_transitivity_random_triples_g12(self, rng):
        o = make_oracle("sierpinski", 12)
        n = o.grid.n
        for _ in range(500):
            pts = [
                o.grid.center(int(rng.integers(n)), int(rng.integers(n)))
                for _ in range(3)
            ]
            a, b, c = sorted(pts, key=o.key_of_point)
            assert o.compare(a, b) <= 0 and o.compare(b, c) <= 0 and o.compare(a, c) <= 0

    def test_sort_singleton(self):
        o = make_oracle("zorder", 2)
        p = o.grid.center(1, 1)
        assert o.sort_by_order([p]) == [p]

    def test_sort_idempotent_and_permutation_invariant(self, rng):
        o = make_oracle("hilbert", 5)
        n = o.grid.n
        cells = set()
        while len(cells) < 20:
            cells.add((int(rng.integers(n)), int(rng.integers(n))))
        pts = [o.grid.center(*c) for c in cells]
        ref = o.sort_by_order(pts)
        assert o.sort_by_order(ref) == ref
        for _ in range(100):
            shuffled = list(pts)
            rng.shuffle(shuffled)
            assert o.sort_by_order(shuffled) == ref

    def test_sort_rejects_duplicates(self):
        o = make_oracle("rowmajor", 2)
        p = o.grid.center(1, 1)
        with pytest.raises(DuplicatePointError):
            o.sort_by_order([p, p])


class TestOrderFiles(object):
    def test_rowmajor_file_equivalence(self, tmp_path):
        g = 3
        path = tmp_path / "rowmajor.txt"
        with open(path, "w") as fh:
            fh.write(f"g={g}\n# reading order\n")
            for iy in range(1 << g):
                for ix in range(1 << g):
                    fh.write(f"{ix} {iy}\n")
        loaded = load_order_file(str(path))
        built_in = make_oracle("rowmajor", g)
        cells = [built_in.grid.center(ix, iy) for ix in range(8) for iy in range(8)]
        for a, b in itertools.combinations(cells, 2):
            assert loaded.compare(a, b) == built_in.compare(a, b)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(OrderFileError):
            load_order_file(str(path))

    def test_duplicate_cell_names_line(self, tmp_path):
        path = tmp_path / "dup.txt"
        path.write_text("g=1\n0 0\n1 0\n0 0\n0 1\n")
        with pytest.raises(OrderFileError) as err:
            load_order_file(str(path))
        assert err.value.line == 4

    def test_missing_cell(self, tmp_path):
        path = tmp_path / "missing.txt"
        path.write_text("g=1\n0 0\n1 0\n0 1\n")
        with pytest.raises(OrderFileError, match="3 of 4"):
            load_order_file(str(path))

    def test_oracle_from_ranks_validates(self):
        with pytest.raises(Exception):
            oracle_from_ranks(np.zeros((4, 4), np.int64))


class TestAscendingStreams:
    @pytest.mark.parametrize("kind", CURVE_KINDS)
    def test_stream_matches_brute_force(self, kind, rng):
        g = 6
        o = make_oracle(kind, g)
        for trial in range(12):
            j = int(rng.integers(1, 17))
            line = DiscreteLine(AngleIndex(j, 16), float(rng.uniform(-0.4, 0.4)))
            region = StripRegion(
                line, halfwidth=float(rng.uniform(0.02, 0.1)),
                bounds=(0.0, 0.0, 1.0, 1.0),
                span=(-0.3, 0.3),
            )
            got = list(o.stream_cells_ascending(region))
            ix, iy = all_cells(g)
            xs = (ix + 0.5) * o.grid.spacing
            ys = (iy + 0.5) * o.grid.spacing
            keep = [
                (int(k), int(x), int(y))
                for x, y, k in zip(ix, iy, o.keys(ix, iy))
                if region.contains(float((x + 0.5) * o.grid.spacing),
                                   float((y + 0.5) * o.grid.spacing))
            ]
            keep.sort()
            assert got == keep, (kind, trial)
