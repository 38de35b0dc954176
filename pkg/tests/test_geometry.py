import math

import numpy as np
import pytest

from deeploc import geometry
from deeploc.auxiliaries import exception
from deeploc.geometry import IsoTransform, Point2, Pose, PoseOffset


@pytest.mark.parametrize('angle, expected', [
  (0.0, 0.0),
  (math.pi, math.pi),
  (-math.pi, math.pi),
  (3.0*math.pi, math.pi),
  (1.5*math.pi, -0.5*math.pi),
  (-1.5*math.pi, 0.5*math.pi),
])
def test_wrap_angle(angle, expected):
  assert geometry.wrap_angle(angle) == pytest.approx(expected, abs=1e-12)


def test_wrap_angle_keeps_angles_in_range_unchanged(rng):
  for a in rng.uniform(-math.pi, math.pi, 200):
    if a > -math.pi:
      assert geometry.wrap_angle(a) == a


def test_wrap_angle_range(rng):
  for a in rng.uniform(-100.0, 100.0, 1000):
    w = geometry.wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angles_matches_scalar_version(rng):
  angles = rng.uniform(-50.0, 50.0, 500)
  wrapped = geometry.wrap_angles(angles)
  np.testing.assert_allclose(wrapped, [geometry.wrap_angle(a) for a in angles], atol=1e-12)


def test_wrap_angle_rejects_non_finite():
  with pytest.raises(exception.InputError):
    geometry.wrap_angle(float('nan'))
  with pytest.raises(exception.InputError):
    Pose(0.0, float('inf'), 0.0)


def test_pose_heading_is_wrapped():
  assert Pose(1.0, 2.0, 2.0*math.pi + 0.25).phi == pytest.approx(0.25)


def test_transform_round_trip(rng):
  for _ in range(1000):
    pose = Pose(*rng.uniform(-1000.0, 1000.0, 2), rng.uniform(-math.pi, math.pi))
    points = rng.uniform(-200.0, 200.0, (5, 2))
    back = geometry.vehicle_to_world(pose, geometry.world_to_vehicle(pose, points))
    np.testing.assert_allclose(back, points, atol=1e-9)


def test_compose_with_inverse_is_identity(rng):
  for _ in range(100):
    t = geometry.pose_to_transform(Pose(*rng.uniform(-50.0, 50.0, 2), rng.uniform(-3.0, 3.0)))
    h = geometry.compose(t, geometry.invert(t)).as_matrix()
    np.testing.assert_allclose(h, np.eye(3), atol=1e-12)


def test_compose_applies_right_operand_first():
  shift = IsoTransform(np.eye(2), [1.0, 0.0])
  turn = geometry.pose_to_transform(Pose(0.0, 0.0, math.pi/2))
  q = geometry.apply(geometry.compose(turn, shift), Point2(0.0, 0.0))
  assert (q.x, q.y) == pytest.approx((0.0, 1.0), abs=1e-12)


def test_world_to_vehicle_axes():
  pose = Pose(10.0, 5.0, math.pi/2)
  # a point ahead of the vehicle lies on its x axis
  local = geometry.world_to_vehicle(pose, np.array([[10.0, 7.0]]))
  np.testing.assert_allclose(local, [[2.0, 0.0]], atol=1e-12)


def test_apply_matches_apply_points(rng):
  t = geometry.pose_to_transform(Pose(3.0, -4.0, 0.7))
  points = rng.normal(size=(10, 2))
  expected = np.array([geometry.apply(t, Point2(x, y)).as_array() for x, y in points])
  np.testing.assert_allclose(geometry.apply_points(t, points), expected, atol=1e-12)


def test_iso_transform_rejects_reflection():
  with pytest.raises(exception.InputError):
    IsoTransform(np.diag([1.0, -1.0]), [0.0, 0.0])


def test_offset_between_inverts_compose_pose():
  a = Pose(1.0, 2.0, 3.0)
  b = Pose(-1.0, 0.5, -3.0)
  d = geometry.offset_between(a, b)
  assert d.dphi == pytest.approx(2.0*math.pi - 6.0)
  c = geometry.compose_pose(a, d)
  assert (c.x, c.y, c.phi) == pytest.approx((b.x, b.y, b.phi), abs=1e-12)


def test_negated_offset():
  d = -PoseOffset(1.0, -2.0, 0.5)
  assert d.as_array() == pytest.approx([-1.0, 2.0, -0.5])
