import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowres_match.errors import DegenerateGeometry, InvalidCoordinate
from lowres_match.geometry import (
    DirectedSegment,
    Point,
    absolute_area,
    angle_sequence,
    local_projection,
    signed_angle,
    wrap_angle,
)

from oracles import haversine_m, shoelace_closed


def seg(ax, ay, bx, by):
    return DirectedSegment(Point(ax, ay), Point(bx, by))


finite_coord = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)


def polyline_strategy(min_points=3, max_points=30):
    def dedupe(pts):
        out = [pts[0]]
        for p in pts[1:]:
            if p != out[-1]:
                out.append(p)
        return out

    return (
        st.lists(
            st.tuples(finite_coord, finite_coord), min_size=min_points, max_size=max_points
        )
        .map(lambda pts: [Point(x, y) for x, y in pts])
        .map(dedupe)
        .filter(lambda pts: len(pts) >= min_points)
    )


class TestLocalProjection:
    def test_identity_at_origin(self):
        (p,) = local_projection((2.35, 48.85), [(2.35, 48.85)])
        assert p == Point(0.0, 0.0)

    def test_one_meter_north(self):
        dlat = 1.0 / 6_371_000.0 * 180.0 / math.pi
        (p,) = local_projection((0.0, 0.0), [(0.0, dlat)])
        assert abs(p.x) < 1e-9
        assert abs(p.y - 1.0) < 1e-6

    def test_hundredth_degree_east_at_paris(self):
        # frozen independently: 6371000 * radians(0.01) * cos(radians(48.85))
        (p,) = local_projection((2.35, 48.85), [(2.36, 48.85)])
        assert p.x == pytest.approx(731.6988707775796, abs=1e-6)
        assert p.y == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("bad", [(200.0, 10.0), (10.0, 91.0), (-181.0, 0.0), (0.0, -90.5)])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(InvalidCoordinate):
            local_projection((0.0, 0.0), [bad])

    def test_distance_preservation_20km(self):
        # within 0.1% of the great-circle distance over a 20 km extent
        rng = random.Random(7)
        origin = (6.0, 45.0)
        for _ in range(50):
            lon1 = origin[0] + rng.uniform(-0.12, 0.12)
            lat1 = origin[1] + rng.uniform(-0.09, 0.09)
            lon2 = origin[0] + rng.uniform(-0.12, 0.12)
            lat2 = origin[1] + rng.uniform(-0.09, 0.09)
            p1, p2 = local_projection(origin, [(lon1, lat1), (lon2, lat2)])
            reference = haversine_m(lon1, lat1, lon2, lat2)
            if reference < 100.0:
                continue
            planar = math.hypot(p2.x - p1.x, p2.y - p1.y)
            assert abs(planar - reference) / reference < 0.001


class TestSignedAngle:
    def test_identical_directions(self):
        assert signed_angle(seg(0, 0, 1, 0), seg(0, 0, 1, 0)) == 0.0

    def test_quarter_turn_ccw(self):
        assert signed_angle(seg(0, 0, 1, 0), seg(0, 0, 0, 1)) == pytest.approx(math.pi / 2)

    def test_eighth_turn_cw(self):
        assert signed_angle(seg(0, 0, 1, 0), seg(0, 0, 1, -1)) == pytest.approx(-math.pi / 4)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateGeometry):
            seg(1, 1, 1, 1)

    @given(
        st.tuples(finite_coord, finite_coord, finite_coord, finite_coord),
        st.tuples(finite_coord, finite_coord, finite_coord, finite_coord),
    )
    def test_antisymmetry_and_range(self, t1, t2):
        try:
            u = seg(*t1)
            v = seg(*t2)
        except DegenerateGeometry:
            return
        a = signed_angle(u, v)
        b = signed_angle(v, u)
        assert -math.pi < a <= math.pi
        if abs(a) != math.pi:
            assert a == pytest.approx(-b, abs=1e-12)
        assert signed_angle(u, u) == 0.0


class TestAngleSequence:
    def test_collinear(self):
        out = angle_sequence([Point(0, 0), Point(1, 0), Point(2, 0)], seg(0, 0, 2, 0))
        assert out.running == (0.0,)
        assert out.straight == (0.0, 0.0)

    def test_single_right_turn(self):
        out = angle_sequence([Point(0, 0), Point(1, 0), Point(1, 1)], seg(0, 0, 2, 0))
        assert out.running == pytest.approx((math.pi / 2,))
        assert out.straight == pytest.approx((0.0, math.pi / 2))

    def test_duplicate_points_rejected(self):
        with pytest.raises(DegenerateGeometry):
            angle_sequence([Point(0, 0), Point(0, 0), Point(1, 0)], seg(0, 0, 2, 0))

    @given(polyline_strategy(), st.tuples(finite_coord, finite_coord, finite_coord, finite_coord))
    def test_coupling_identity_matches_pairwise_angles(self, path, base_coords):
        try:
            base = seg(*base_coords)
        except DegenerateGeometry:
            return
        out = angle_sequence(path, base)
        # independent per-pair recomputation
        links = [DirectedSegment(p, q) for p, q in zip(path, path[1:])]
        for i in range(len(out.straight) - 1):
            expected_turn = signed_angle(links[i], links[i + 1])
            assert abs(wrap_angle(out.straight[i + 1] - out.straight[i] - expected_turn)) < 1e-9
            assert out.running[i] == expected_turn

    @given(polyline_strategy(), st.tuples(finite_coord, finite_coord, finite_coord, finite_coord))
    def test_telescoping_sum(self, path, base_coords):
        try:
            base = seg(*base_coords)
        except DegenerateGeometry:
            return
        out = angle_sequence(path, base)
        acc = 0.0
        for i in range(1, len(out.straight)):
            acc += out.running[i - 1]
            assert abs(wrap_angle(acc - (out.straight[i] - out.straight[0]))) < 1e-9


class TestAbsoluteArea:
    def test_collinear_is_zero(self):
        path = [Point(0, 0), Point(3, 0), Point(7, 0), Point(10, 0)]
        assert absolute_area(path, seg(0, 0, 10, 0)) == 0.0

    def test_rectangle(self):
        assert absolute_area([Point(0, 1), Point(10, 1)], seg(0, 0, 10, 0)) == pytest.approx(
            10.0, abs=1e-9
        )

    def test_two_lobes_no_cancellation(self):
        # hand-integrated: each crossing splits into two 1.25 m^2 triangles
        path = [Point(0, 1), Point(5, -1), Point(10, 1)]
        assert absolute_area(path, seg(0, 0, 10, 0)) == pytest.approx(5.0, abs=1e-9)

    @given(polyline_strategy(min_points=2, max_points=12))
    def test_lower_bound_by_shoelace(self, path):
        base = seg(-20000.0, -1.0, 20000.0, -1.0)
        area = absolute_area(path, base)
        closed = shoelace_closed(list(path) + [base.b, base.a])
        assert area >= abs(closed) - 1e-6 * max(1.0, abs(closed))

    @given(
        polyline_strategy(min_points=2, max_points=12),
        st.floats(-math.pi, math.pi),
        finite_coord,
        finite_coord,
    )
    def test_rigid_motion_invariance(self, path, theta, tx, ty):
        base = seg(0, 0, 10, 0)
        ref = absolute_area(path, base)
        c, s = math.cos(theta), math.sin(theta)

        def move(p):
            return Point(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty)

        moved = absolute_area([move(p) for p in path], DirectedSegment(move(base.a), move(base.b)))
        assert moved == pytest.approx(ref, rel=1e-6, abs=1e-6)
