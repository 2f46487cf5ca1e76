import math

import numpy as np
import pytest

from fusemot.geometry import (Box3D, Detection, bev_corners, convex_hull, giou3d,
                              hull_volume, intersection_volume, iou3d, nms,
                              polygon_area, volume, wrap_angle)
from oracles import mc_intersection_volume, mc_hull_volume, random_box


def test_box_invariants():
    box = Box3D(0, 0, 0, 1, 2, 3, yaw=4.0)
    assert -math.pi < box.yaw <= math.pi
    with pytest.raises(ValueError):
        Box3D(0, 0, 0, -1, 2, 3, 0)
    with pytest.raises(ValueError):
        Box3D(0, 0, 0, 1, 0, 3, 0)


def test_wrap_angle_range():
    for a in np.linspace(-12, 12, 401):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert abs(math.sin(w) - math.sin(a)) < 1e-12
        assert abs(math.cos(w) - math.cos(a)) < 1e-12
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_volume_cases():
    assert volume(Box3D(0, 0, 0, 1, 1, 1, 0)) == pytest.approx(1.0)
    assert volume(Box3D(5, -2, 1, 2, 3, 0.5, 0.7)) == pytest.approx(3.0)
    # pose does not change the volume
    assert volume(Box3D(9.3, 2.2, -4.0, 1.6, 3.9, 1.5, 2.4)) == pytest.approx(9.36)


def test_bev_corners_axis_aligned():
    corners = bev_corners(Box3D(1, 2, 0, w=2, l=4, h=1, yaw=0))
    expected = {(3, 3), (-1, 3), (-1, 1), (3, 1)}
    assert {tuple(np.round(c, 9)) for c in corners} == expected


def test_polygon_area_square():
    square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]])
    assert polygon_area(square) == pytest.approx(4.0)


def test_intersection_identical():
    box = Box3D(1, 2, 3, 1.5, 2.5, 1.0, 0.3)
    assert intersection_volume(box, box) == pytest.approx(volume(box), abs=1e-9)


def test_intersection_half_overlap():
    a = Box3D(0, 0, 0, 1, 1, 1, 0)
    b = Box3D(0.5, 0, 0, 1, 1, 1, 0)
    assert intersection_volume(a, b) == pytest.approx(0.5, abs=1e-9)


def test_intersection_disjoint():
    a = Box3D(0, 0, 0, 1, 1, 1, 0)
    b = Box3D(5, 0, 0, 1, 1, 1, 0)
    assert intersection_volume(a, b) == 0.0
    # disjoint in z only
    c = Box3D(0, 0, 5, 1, 1, 1, 0)
    assert intersection_volume(a, c) == 0.0


def test_giou_identical():
    box = Box3D(0.3, -1, 0.2, 1.1, 2.2, 0.9, 1.2)
    assert giou3d(box, box) == pytest.approx(1.0, abs=1e-9)


def test_giou_half_overlap_analytic():
    a = Box3D(0, 0, 0, 1, 1, 1, 0)
    b = Box3D(0.5, 0, 0, 1, 1, 1, 0)
    # V_inter 0.5, V_union 1.5, hull 1.5 -> 1/3 with no hull penalty
    assert giou3d(a, b) == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_giou_disjoint_negative():
    a = Box3D(0, 0, 0, 1, 1, 1, 0)
    for gap in (1.5, 3.0, 10.0, 50.0):
        g = giou3d(a, Box3D(gap, 0, 0, 1, 1, 1, 0))
        assert -1.0 < g < 0.0
    # farther apart approaches -1 from above
    near = giou3d(a, Box3D(3.0, 0, 0, 1, 1, 1, 0))
    far = giou3d(a, Box3D(60.0, 0, 0, 1, 1, 1, 0))
    assert far < near
    assert far > -1.0


def test_giou_symmetry_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b = random_box(rng), random_box(rng)
        assert giou3d(a, b) == pytest.approx(giou3d(b, a), abs=1e-9)


def test_iou_bounds_giou():
    rng = np.random.default_rng(8)
    for _ in range(50):
        a, b = random_box(rng), random_box(rng)
        assert iou3d(a, b) >= giou3d(a, b) - 1e-12


def test_intersection_bounded_by_min_volume():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a, b = random_box(rng), random_box(rng)
        assert intersection_volume(a, b) <= min(volume(a), volume(b)) + 1e-9


def test_rigid_transform_invariance():
    rng = np.random.default_rng(10)
    for _ in range(25):
        a, b = random_box(rng), random_box(rng)
        base = giou3d(a, b)
        tx, ty = rng.uniform(-10, 10, 2)
        rot = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(rot), math.sin(rot)

        def moved(box):
            x = box.x * c - box.y * s + tx
            y = box.x * s + box.y * c + ty
            return Box3D(x, y, box.z, box.w, box.l, box.h, box.yaw + rot)

        assert giou3d(moved(a), moved(b)) == pytest.approx(base, abs=1e-6)


def test_convex_hull_square_with_interior():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.2, 0.8]])
    hull = convex_hull(pts)
    assert len(hull) == 4
    assert polygon_area(hull) == pytest.approx(1.0)


def test_monte_carlo_oracle_small():
    # Small version of the acceptance oracle: 20 pairs, 1e5 samples.
    rng = np.random.default_rng(123)
    for _ in range(20):
        a, b = random_box(rng), random_box(rng)
        inter = intersection_volume(a, b)
        mc_inter = mc_intersection_volume(a, b, 100_000, rng)
        assert abs(inter - mc_inter) <= 1e-2 * max(volume(a), volume(b))
        hull = hull_volume(a, b)
        mc_hull = mc_hull_volume(a, b, 100_000, rng)
        assert abs(hull - mc_hull) <= 1e-2 * hull


def _det(x, score, category=0, y=0.0):
    return Detection(Box3D(x, y, 0, 1, 1, 1, 0), score, category)


def test_nms_singleton():
    d = _det(0, 0.5)
    assert nms([d], 0.1) == [d]
    assert nms([], 0.1) == []


def test_nms_duplicate_suppression():
    strong, weak = _det(0, 0.9), _det(0, 0.4)
    kept = nms([weak, strong], 0.1)
    assert kept == [strong]


def test_nms_disjoint_survive():
    a, b = _det(0, 0.9), _det(5, 0.1)
    assert nms([a, b], 0.1) == [a, b]


def test_nms_class_aware():
    car = _det(0, 0.9, category=0)
    ped = _det(0, 0.4, category=1)
    assert nms([car, ped], 0.1) == [car, ped]


def test_nms_threshold_validation():
    with pytest.raises(ValueError):
        nms([_det(0, 0.5)], 1.5)
