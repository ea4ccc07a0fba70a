import numpy as np
import pytest
from shapely.geometry import LineString, Point, box

from robustplan import geometry


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_point_segment_distance_matches_shapely(rng):
    p = rng.uniform(-1, 1, (300, 2))
    a = rng.uniform(-1, 1, (300, 2))
    b = rng.uniform(-1, 1, (300, 2))
    got = geometry.point_segment_distance(p, a, b)
    want = [LineString([tuple(x), tuple(y)]).distance(Point(*q)) for q, x, y in zip(p, a, b)]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_degenerate_segment_is_a_point():
    d = geometry.point_segment_distance(np.array([3.0, 4.0]), np.zeros(2), np.zeros(2))
    assert d == pytest.approx(5.0)


def test_point_box_distance_matches_shapely(rng):
    p = rng.uniform(-2, 2, (300, 2))
    c = rng.uniform(-1, 1, (300, 2))
    h = rng.uniform(0.05, 0.8, (300, 2))
    got = geometry.point_box_distance(p, c, h)
    want = [box(*(ci - hi), *(ci + hi)).distance(Point(*q)) for q, ci, hi in zip(p, c, h)]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_segment_hits_box_matches_shapely(rng):
    a = rng.uniform(-1.5, 1.5, (500, 2))
    b = rng.uniform(-1.5, 1.5, (500, 2))
    c = rng.uniform(-0.5, 0.5, (500, 2))
    h = rng.uniform(0.05, 0.5, (500, 2))
    got = geometry.segment_hits_box(a, b, c, h)
    want = [LineString([tuple(x), tuple(y)]).intersects(box(*(ci - hi), *(ci + hi)))
            for x, y, ci, hi in zip(a, b, c, h)]
    assert got.tolist() == want


def test_axis_parallel_segment_against_box():
    c = np.zeros(2)
    h = np.array([0.5, 0.5])
    assert geometry.segment_hits_box(np.array([-1.0, 0.2]), np.array([1.0, 0.2]), c, h)
    assert not geometry.segment_hits_box(np.array([-1.0, 0.7]), np.array([1.0, 0.7]), c, h)
    # a point segment inside the box
    assert geometry.segment_hits_box(np.array([0.1, 0.1]), np.array([0.1, 0.1]), c, h)


def test_segments_intersect_matches_shapely(rng):
    pts = rng.uniform(-1, 1, (800, 4, 2))
    got = geometry.segments_intersect(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3])
    want = [LineString(q[:2]).intersects(LineString(q[2:])) for q in pts]
    assert got.tolist() == want


def test_collinear_and_touching_segments():
    z = np.array
    assert geometry.segments_intersect(z([0.0, 0]), z([2.0, 0]), z([1.0, 0]), z([3.0, 0]))
    assert not geometry.segments_intersect(z([0.0, 0]), z([1.0, 0]), z([2.0, 0]), z([3.0, 0]))
    assert geometry.segments_intersect(z([0.0, 0]), z([1.0, 0]), z([1.0, 0]), z([1.0, 5]))


def test_arm_joints_forward_kinematics():
    j = geometry.arm_joints(np.array([np.pi / 2, -np.pi / 2]), np.array([1.0, 1.0]), (1.0, 2.0))
    np.testing.assert_allclose(j, [[1, 1], [1, 2], [3, 2]], atol=1e-12)
    batch = geometry.arm_joints(np.zeros((4, 3)), np.zeros(2), (1.0, 1.0, 1.0))
    assert batch.shape == (4, 4, 2)
    np.testing.assert_allclose(batch[:, -1], [[3, 0]] * 4)
