"""Poses, paths, map loading and the lateral-error metric."""

import json
import math

import numpy as np
import pytest

from vilbench.errors import DegenerateMap, MalformedMap
from vilbench.geometry import (Pose2D, WaypointPath, builtin_map, lateral_error, load_map,
                               normalize_angle)


def brute_force_distance(px, py, points, closed, samples_per_segment=2000):
    """Independent oracle: min distance over a densely sampled polyline."""
    pts = [tuple(p) for p in points]
    if closed:
        pts = pts + [pts[0]]
    best = math.inf
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        ts = np.linspace(0.0, 1.0, samples_per_segment)
        xs = x0 + ts * (x1 - x0)
        ys = y0 + ts * (y1 - y0)
        best = min(best, float(np.min(np.hypot(xs - px, ys - py))))
    return best


class TestNormalizeAngle:
    def test_range(self):
        for theta in np.linspace(-20, 20, 1001):
            w = normalize_angle(float(theta))
            assert -math.pi < w <= math.pi

    def test_identity_inside_range(self):
        assert normalize_angle(0.5) == pytest.approx(0.5, abs=1e-15)
        assert normalize_angle(math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-math.pi) == pytest.approx(math.pi)

    def test_wraps(self):
        assert normalize_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        assert normalize_angle(2 * math.pi + 0.1) == pytest.approx(0.1)


class TestPose2D:
    def test_heading_normalized_on_construction(self):
        p = Pose2D(1.0, 2.0, 7.0)
        assert -math.pi < p.heading <= math.pi
        assert p.heading == pytest.approx(7.0 - 2 * math.pi)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Pose2D(float("nan"), 0.0, 0.0)
        with pytest.raises(ValueError):
            Pose2D(0.0, float("inf"), 0.0)


class TestLoadMap:
    def test_minimal_straight_line(self):
        src = json.dumps({"closed": False, "lane_width": 3.5,
                          "points": [[0, 0], [100, 0]]})
        path = load_map(src)
        assert not path.closed
        assert path.length == pytest.approx(100.0)
        assert path.lane_width == 3.5

    def test_single_point_degenerate(self):
        src = json.dumps({"closed": False, "lane_width": 3.5, "points": [[0, 0]]})
        with pytest.raises(DegenerateMap):
            load_map(src)

    def test_duplicate_consecutive_points_degenerate(self):
        src = json.dumps({"closed": False, "lane_width": 3.5,
                          "points": [[0, 0], [0, 0.001], [10, 0]]})
        with pytest.raises(DegenerateMap):
            load_map(src)

    def test_closed_with_repeated_endpoint_degenerate(self):
        # closure is implicit; an explicit repeat makes a zero-length segment
        src = json.dumps({"closed": True, "lane_width": 3.5,
                          "points": [[0, 0], [10, 0], [10, 10], [0, 0]]})
        with pytest.raises(DegenerateMap):
            load_map(src)

    def test_syntax_error(self):
        with pytest.raises(MalformedMap):
            load_map("{not json")

    def test_missing_fields(self):
        with pytest.raises(MalformedMap):
            load_map(json.dumps({"points": [[0, 0], [1, 1]]}))

    def test_bad_points_shape(self):
        with pytest.raises(MalformedMap):
            load_map(json.dumps({"closed": False, "lane_width": 3.0,
                                 "points": [[0, 0, 0], [1, 1, 1]]}))

    def test_zero_lane_width(self):
        with pytest.raises(DegenerateMap):
            load_map(json.dumps({"closed": False, "lane_width": 0,
                                 "points": [[0, 0], [1, 0]]}))

    def test_bundled_oval_length_matches_analytic(self):
        # two 200 m straights + two semicircles of radius 30 m
        analytic = 2 * 200.0 + 2 * math.pi * 30.0
        path = builtin_map("oval_588")
        assert path.closed
        assert abs(path.length - analytic) / analytic < 0.005

    def test_bundled_straight(self):
        path = builtin_map("straight_1km")
        assert not path.closed
        assert path.length == pytest.approx(1000.0)


class TestLateralError:
    def setup_method(self):
        self.straight = WaypointPath([[0, 0], [100, 0]], closed=False, lane_width=3.5)

    def test_on_the_line(self):
        assert lateral_error(Pose2D(50, 0), self.straight) == pytest.approx(0.0, abs=1e-12)

    def test_perpendicular_offset(self):
        assert lateral_error(Pose2D(50, 0.04), self.straight) == pytest.approx(0.04, abs=1e-12)

    def test_endpoint_clamping(self):
        path = WaypointPath([[0, 0], [0, 10]], closed=False)
        assert lateral_error(Pose2D(3, 4), path) == pytest.approx(3.0, abs=1e-12)
        # nearest point is the endpoint (0, 0)
        assert lateral_error(Pose2D(-3, -4), path) == pytest.approx(5.0, abs=1e-12)

    def test_against_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        pts = [[0, 0], [20, 5], [40, -3], [60, 10], [55, 30]]
        path = WaypointPath(pts, closed=False)
        for _ in range(40):
            px, py = rng.uniform(-10, 70), rng.uniform(-15, 40)
            fast = lateral_error(Pose2D(px, py), path)
            slow = brute_force_distance(px, py, pts, closed=False)
            # oracle resolution: sampling a ~60 m segment in 2000 steps
            assert fast <= slow + 1e-12
            assert fast == pytest.approx(slow, abs=1e-3)

    def test_closed_path_uses_closure_segment(self):
        square = WaypointPath([[0, 0], [10, 0], [10, 10], [0, 10]], closed=True)
        # closest approach is the implicit last->first edge at x=0
        assert lateral_error(Pose2D(-2, 5), square) == pytest.approx(2.0, abs=1e-12)
        slow = brute_force_distance(-2, 5, [[0, 0], [10, 0], [10, 10], [0, 10]], closed=True)
        assert lateral_error(Pose2D(-2, 5), square) == pytest.approx(slow, abs=1e-5)

    def test_rigid_transform_invariance(self):
        pts = np.array([[0.0, 0.0], [20.0, 5.0], [40.0, -3.0], [60.0, 10.0]])
        rng = np.random.default_rng(21)
        for _ in range(25):
            theta = rng.uniform(-math.pi, math.pi)
            tx, ty = rng.uniform(-100, 100, size=2)
            rot = np.array([[math.cos(theta), -math.sin(theta)],
                            [math.sin(theta), math.cos(theta)]])
            p = rng.uniform(-20, 80, size=2)
            base = lateral_error(Pose2D(p[0], p[1]), WaypointPath(pts, closed=False))
            moved_pts = pts @ rot.T + [tx, ty]
            moved_p = rot @ p + [tx, ty]
            moved = lateral_error(Pose2D(moved_p[0], moved_p[1]),
                                  WaypointPath(moved_pts, closed=False))
            assert moved == pytest.approx(base, abs=1e-9)

    def test_zero_iff_on_segment(self):
        pts = [[0, 0], [30, 10], [60, 0]]
        path = WaypointPath(pts, closed=False)
        rng = np.random.default_rng(5)
        for _ in range(20):
            seg = rng.integers(0, 2)
            t = rng.uniform(0, 1)
            a, b = np.array(pts[seg]), np.array(pts[seg + 1])
            q = a + t * (b - a)
            assert lateral_error(Pose2D(q[0], q[1]), path) < 1e-12
        for _ in range(20):
            q = rng.uniform(-5, 65, size=2) + [0, 20]  # well above the path
            assert lateral_error(Pose2D(q[0], q[1]), path) > 1e-12


class TestArcLength:
    def test_project_recovers_station(self):
        path = builtin_map("oval_588")
        rng = np.random.default_rng(3)
        for s in rng.uniform(0, path.length, size=30):
            pose = path.point_at(float(s))
            s_back, d = path.project(pose.x, pose.y)
            assert d < 1e-9
            assert s_back == pytest.approx(float(s), abs=1e-6)

    def test_point_at_wraps_on_closed(self):
        path = builtin_map("oval_588")
        a = path.point_at(1.0)
        b = path.point_at(path.length + 1.0)
        assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-9)

    def test_resample_spacing(self):
        path = builtin_map("straight_1km")
        pts = path.resample_ahead(0.0, 10.0, 1.0)
        assert len(pts) == 10
        assert [p.x for p in pts] == pytest.approx(list(range(1, 11)), abs=1e-9)
        assert all(p.y == pytest.approx(0.0, abs=1e-12) for p in pts)

    def test_forward_arc_distance_wraps(self):
        path = builtin_map("oval_588")
        assert path.forward_arc_distance(path.length - 5.0, 5.0) == pytest.approx(10.0, abs=1e-9)
