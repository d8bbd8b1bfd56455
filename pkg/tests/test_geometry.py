import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseprompt.core import EmptyPointSetError, ImagePixels, Point, PointSet
from sparseprompt.geometry import (
    GridSpec,
    convex_hull,
    global_centroid,
    load_points,
    prune_boundary,
    save_points,
    sparsify,
)

from oracles import hull_vertices_bruteforce, sparsify_bruteforce

SQUARE_PLUS_CENTER = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 4.0), (2.0, 2.0)]


def ps(points, h=16, w=16):
    return PointSet(np.array(points, dtype=np.float64).reshape(-1, 2), ImagePixels(h, w))


def int_point_sets(max_size=12, coord_max=10):
    return st.sets(
        st.tuples(st.integers(0, coord_max), st.integers(0, coord_max)),
        min_size=1,
        max_size=max_size,
    ).map(lambda s: sorted(s))


class TestConvexHull:
    def test_square_with_interior_point(self):
        hull = convex_hull(ps(SQUARE_PLUS_CENTER))
        assert hull.vertex_set() == {(0, 0), (4, 0), (0, 4), (4, 4)}
        assert hull.source_count == 5

    def test_singleton(self):
        hull = convex_hull(ps([(1.0, 1.0)]))
        assert hull.vertex_set() == {(1.0, 1.0)}

    def test_pair(self):
        hull = convex_hull(ps([(1.0, 1.0), (3.0, 2.0)]))
        assert hull.vertex_set() == {(1.0, 1.0), (3.0, 2.0)}

    def test_collinear_set_keeps_extremes_only(self):
        hull = convex_hull(ps([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]))
        assert hull.vertex_set() == {(0.0, 0.0), (3.0, 3.0)}

    def test_edge_midpoint_is_not_a_vertex(self):
        hull = convex_hull(ps([(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (2.0, 3.0)]))
        assert hull.vertex_set() == {(0.0, 0.0), (4.0, 0.0), (2.0, 3.0)}

    def test_counter_clockwise_orientation(self):
        hull = convex_hull(ps(SQUARE_PLUS_CENTER))
        v = hull.vertices
        area2 = 0.0
        for i in range(len(v)):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % len(v)]
            area2 += x1 * y2 - x2 * y1
        assert area2 > 0  # shoelace sign: CCW with y up

    def test_empty_raises(self):
        with pytest.raises(EmptyPointSetError):
            convex_hull(PointSet(np.empty((0, 2)), ImagePixels(4, 4)))

    def test_disk_interior_plus_enclosing_corners(self):
        rng = np.random.default_rng(1234)
        corners = [(0.0, 0.0), (40.0, 0.0), (0.0, 40.0), (40.0, 40.0)]
        pts = list(corners)
        while len(pts) < 24:
            x, y = rng.uniform(5, 35, size=2)
            if (x - 20) ** 2 + (y - 20) ** 2 <= 14**2 and (x, y) not in pts:
                pts.append((float(x), float(y)))
        hull = convex_hull(ps(pts, h=41, w=41))
        assert hull.vertex_set() == set(corners)
        assert hull.vertex_set() == hull_vertices_bruteforce(pts)

    @settings(max_examples=200, deadline=None)
    @given(int_point_sets())
    def test_matches_caratheodory_oracle(self, pts):
        got = convex_hull(ps([(float(x), float(y)) for x, y in pts], h=11, w=11))
        assert got.vertex_set() == hull_vertices_bruteforce(pts)


class TestPruneBoundary:
    def test_square_leaves_center(self):
        out = prune_boundary(ps(SQUARE_PLUS_CENTER))
        assert out.as_tuples() == [(2.0, 2.0)]

    def test_all_vertices_safeguard(self):
        p = ps([(0.0, 0.0), (4.0, 0.0)])
        out = prune_boundary(p)
        assert out.as_tuples() == p.as_tuples()

    def test_min_keep_blocks_overpruning(self):
        pts = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 4.0), (2.0, 2.0)]
        out = prune_boundary(ps(pts), min_keep=2)
        assert out.as_tuples() == list(pts)  # only 1 would survive

    def test_order_preserved(self):
        pts = [(2.0, 2.0), (0.0, 0.0), (3.0, 1.0), (4.0, 0.0), (0.0, 4.0), (4.0, 4.0)]
        out = prune_boundary(ps(pts))
        assert out.as_tuples() == [(2.0, 2.0), (3.0, 1.0)]

    def test_grid_interior_count(self):
        pts = [(float(x), float(y)) for x in range(10) for y in range(10)]
        out = prune_boundary(ps(pts, h=10, w=10))
        verts = hull_vertices_bruteforce(pts)
        assert len(out) == 100 - len(verts)
        assert len(verts) == 4

    def test_empty_raises(self):
        with pytest.raises(EmptyPointSetError):
            prune_boundary(PointSet(np.empty((0, 2)), ImagePixels(4, 4)))

    @settings(max_examples=200, deadline=None)
    @given(int_point_sets())
    def test_matches_oracle_with_safeguard(self, pts):
        p = ps([(float(x), float(y)) for x, y in pts], h=11, w=11)
        verts = hull_vertices_bruteforce(pts)
        survivors = [q for q in p.as_tuples() if q not in verts]
        out = prune_boundary(p)
        if len(survivors) >= 1:
            assert out.as_tuples() == list(survivors)
        else:
            assert out.as_tuples() == p.as_tuples()


class TestGlobalCentroid:
    def test_midpoint(self):
        assert global_centroid(ps([(0.0, 0.0), (2.0, 2.0)])) == Point(1.0, 1.0)

    def test_singleton(self):
        assert global_centroid(ps([(5.0, 7.0)])) == Point(5.0, 7.0)

    def test_five_points_hand_mean(self):
        c = global_centroid(ps([(0.0, 0.0), (0.0, 3.0), (3.0, 0.0), (3.0, 3.0), (1.0, 1.0)]))
        assert c == Point(1.4, 1.4)


class TestGridSpec:
    def test_cell_of_floor(self):
        g = GridSpec(density=2, h=8, w=8)
        assert g.cell_of(0.0, 0.0) == (0, 0)
        assert g.cell_of(3.9, 0.0) == (0, 0)
        assert g.cell_of(4.0, 0.0) == (0, 1)

    def test_far_edge_clamps(self):
        g = GridSpec(density=4, h=8, w=8)
        assert g.cell_of(7.999, 7.999) == (3, 3)

    def test_rejects_bad_density(self):
        with pytest.raises(ValueError):
            GridSpec(density=0, h=8, w=8)

    def test_integer_boundary_exact(self):
        # 4 * 6 / 8 == 3 exactly; two-step float division can miss this
        g = GridSpec(density=6, h=8, w=8)
        assert g.cell_of(4.0, 4.0) == (3, 3)


class TestSparsify:
    def test_worked_example_8x8_d2(self):
        p = ps([(1, 1), (2, 2), (6, 1), (1, 6), (6, 6), (7, 7)], h=8, w=8)
        out = sparsify(p, density=2)
        assert out.as_tuples() == [(2.0, 2.0), (6.0, 1.0), (1.0, 6.0), (6.0, 6.0)]

    def test_d1_keeps_single_closest(self):
        p = ps([(0, 0), (1, 1), (7, 7)], h=8, w=8)
        out = sparsify(p, density=1)
        # centroid (8/3, 8/3); (1,1) is nearest
        assert out.as_tuples() == [(1.0, 1.0)]

    def test_already_sparse_reordered(self):
        p = ps([(6, 6), (1, 1)], h=8, w=8)
        out = sparsify(p, density=2)
        assert out.as_tuples() == [(1.0, 1.0), (6.0, 6.0)]

    def test_distance_tie_prefers_smaller_y_then_x(self):
        # both in one cell, equidistant from centroid (2, 0.5)
        p = ps([(2, 0), (2, 1)], h=8, w=8)
        out = sparsify(p, density=1)
        assert out.as_tuples() == [(2.0, 0.0)]

    def test_output_bounds_and_membership(self):
        rng = np.random.default_rng(77)
        pts = np.unique(rng.integers(0, 32, size=(120, 2)), axis=0).astype(float)
        p = PointSet(pts, ImagePixels(32, 32))
        for d in (1, 2, 3, 5):
            out = sparsify(p, density=d)
            assert len(out) <= d * d
            src = set(map(tuple, pts))
            assert all(q in src for q in out.as_tuples())

    def test_empty_raises(self):
        with pytest.raises(EmptyPointSetError):
            sparsify(PointSet(np.empty((0, 2)), ImagePixels(4, 4)), 2)

    @settings(max_examples=150, deadline=None)
    @given(
        st.integers(1, 8),
        st.sets(
            st.tuples(st.integers(0, 23), st.integers(0, 23)), min_size=1, max_size=60
        ),
    )
    def test_matches_bruteforce(self, density, pts):
        pts = sorted(pts)
        p = ps([(float(x), float(y)) for x, y in pts], h=24, w=24)
        got = [tuple(q) for q in sparsify(p, density).as_tuples()]
        assert got == sparsify_bruteforce(pts, 24, 24, density)


class TestPointsIo:
    def test_roundtrip(self, tmp_path):
        p = ps([(1.25, 2.5), (0.0, 15.0)])
        path = tmp_path / "pts.txt"
        save_points(p, path)
        back = load_points(path, p.space)
        assert back.as_tuples() == p.as_tuples()

    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "pts.txt"
        path.write_text("1 2\n3 4 5\n")
        with pytest.raises(ValueError, match="pts.txt:2"):
            load_points(path, ImagePixels(16, 16))
