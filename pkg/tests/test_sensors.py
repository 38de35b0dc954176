import math

import numpy as np
import pytest

from deeploc import geometry, sensors
from deeploc.auxiliaries import exception
from deeploc.geometry import Pose
from deeploc.sensors import SensorConfig


def test_visible_landmarks_in_vehicle_frame(small_map):
  pose = Pose(10.0, 0.0, math.pi/2)
  visible = sensors.visible_landmarks(small_map, pose, 12.0)
  # (10, 10) and (10, -10) are within 12 m; ascending id order
  np.testing.assert_allclose(visible, [[10.0, 0.0], [-10.0, 0.0]], atol=1e-12)


def test_noiseless_measurements_are_the_visible_landmarks(landmark_map, route, rng):
  pose = route.points[100].pose
  meas = sensors.simulate_measurements(landmark_map, pose, SensorConfig(), rng)
  expected = geometry.world_to_vehicle(pose, landmark_map.query_points(pose.position, 50.0))
  np.testing.assert_array_equal(meas.points, expected)
  assert np.all(np.hypot(meas.points[:, 0], meas.points[:, 1]) <= 50.0 + 1e-9)


def test_miss_removes_points(rng):
  points = rng.normal(size=(40, 2))
  counts = [sensors.apply_miss(points, 5.0, rng).shape[0] for _ in range(2000)]
  assert np.mean(40 - np.array(counts)) == pytest.approx(5.0, abs=0.3)


def test_miss_larger_than_set_empties_it(rng):
  assert sensors.apply_miss(np.ones((3, 2)), 1000.0, rng).shape == (0, 2)


def test_miss_keeps_order_of_survivors(rng):
  points = np.arange(40.0).reshape(20, 2)
  kept = sensors.apply_miss(points, 4.0, rng)
  assert np.all(np.diff(kept[:, 0]) > 0)


def test_clutter_inside_field_of_view(rng):
  clutter = sensors.clutter_points(200.0, 50.0, rng)
  assert clutter.shape[0] > 100
  assert np.all(np.hypot(clutter[:, 0], clutter[:, 1]) <= 50.0)


def test_clutter_count_mean(rng):
  counts = [sensors.clutter_points(20.0, 50.0, rng).shape[0] for _ in range(2000)]
  assert np.mean(counts) == pytest.approx(20.0, abs=0.5)


def test_clutter_uniform_over_disk(rng):
  clutter = sensors.clutter_points(20000.0, 50.0, rng)
  # a uniform disk puts a quarter of the points inside half the radius
  inner = np.mean(np.hypot(clutter[:, 0], clutter[:, 1]) <= 25.0)
  assert inner == pytest.approx(0.25, abs=0.02)


def test_noise_bounded(rng):
  points = rng.normal(size=(500, 2))
  noisy = sensors.apply_noise(points, 0.3, rng)
  assert np.all(np.abs(noisy - points) <= 0.3 + 1e-12)
  assert np.max(np.abs(noisy - points)) > 0.25


def test_zero_rates_leave_points_untouched(rng):
  points = rng.normal(size=(10, 2))
  np.testing.assert_array_equal(sensors.impair(points, 0.0, 0.0, 0.0, 50.0, rng), points)


def test_impair_noise_only_touches_true_detections(rng):
  points = np.zeros((5, 2))
  out = sensors.impair(points, 0.0, 30.0, 0.1, 50.0, rng)
  assert np.all(np.abs(out[:5]) <= 0.1 + 1e-12)
  assert out.shape[0] >= 5


def test_impairment_streams_are_independent():
  points = np.random.default_rng(0).normal(size=(30, 2))*10.0
  a = sensors.impair(points, 3.0, 0.0, 0.2, 50.0, np.random.default_rng(7))
  b = sensors.impair(points, 3.0, 25.0, 0.2, 50.0, np.random.default_rng(7))
  # same misses and noise, b only has clutter appended
  np.testing.assert_array_equal(b[:a.shape[0]], a)


def test_poisson_pmf():
  assert sensors.poisson_pmf(0, 0.0) == 1.0
  assert sensors.poisson_pmf(2, 3.0) == pytest.approx(math.exp(-3.0)*9.0/2.0)
  assert sum(sensors.poisson_pmf(k, 12.0) for k in range(80)) == pytest.approx(1.0)


def test_sample_poisson_rejects_negative_rate(rng):
  with pytest.raises(exception.InputError):
    sensors.sample_poisson(-1.0, rng)


def test_sample_poisson_mean():
  rng = np.random.default_rng([7, 0])
  draws = np.array([sensors.sample_poisson(10.0, rng) for _ in range(100000)])
  assert draws.mean() == pytest.approx(10.0, rel=0.01)


def test_poisson_pmf_at_five():
  assert sensors.poisson_pmf(5, 5.0) == pytest.approx(0.175467, abs=1e-6)


def test_miss_matches_expected_survivors():
  rng = np.random.default_rng([7, 1])
  points = np.arange(60.0).reshape(30, 2)
  expected = sum(sensors.poisson_pmf(k, 10.0)*(30 - min(k, 30)) for k in range(120))
  survivors = [sensors.apply_miss(points, 10.0, rng).shape[0] for _ in range(10000)]
  assert np.mean(survivors) == pytest.approx(expected, rel=0.01)


def test_gps_noise_statistics(rng):
  truth = Pose(100.0, -50.0, 0.3)
  readings = [sensors.simulate_gps(truth, 2.0, math.radians(10.0), rng).pose for _ in range(4000)]
  dx = np.array([r.x for r in readings]) - truth.x
  dphi = np.array([r.phi for r in readings]) - truth.phi
  assert np.std(dx) == pytest.approx(2.0, rel=0.05)
  assert np.std(dphi) == pytest.approx(math.radians(10.0), rel=0.05)
  assert abs(np.mean(dx)) < 0.15


def test_sensor_config_validation():
  with pytest.raises(exception.InputError):
    SensorConfig(lambda_clutter=-1.0)
  with pytest.raises(exception.InputError):
    SensorConfig(fov_radius=0.0)
