import json
import math

import numpy as np
import pytest

from deeploc import geometry, net, sensors, train
from deeploc.auxiliaries import exception
from deeploc.geometry import Pose, PoseOffset
from deeploc.net import NetConfig
from deeploc.train import AdamState, OffsetRange, TrainConfig


def test_sample_offset_within_range(rng):
  r = OffsetRange(2.0, 1.0, math.radians(10.0))
  offsets = np.array([train.sample_offset(r, rng).as_array() for _ in range(2000)])
  assert np.all(np.abs(offsets) <= [2.0, 1.0, math.radians(10.0)])
  np.testing.assert_allclose(offsets.std(axis=0), r.std(), rtol=0.06)


def test_zero_range_gives_zero_offset(rng):
  assert train.sample_offset(OffsetRange(0.0, 0.0, 0.0), rng) == geometry.ZERO_OFFSET


def test_offset_presets():
  assert set(train.OFFSET_PRESETS) == {'2m-10deg', '1m-4deg', '0.5m-2deg'}
  assert train.OFFSET_PRESETS['1m-4deg'].sigma_phi == pytest.approx(math.radians(4.0))


def test_train_sample_leads_back_to_truth(landmark_map, route, rng):
  pose = route.points[200].pose
  meas = sensors.visible_landmarks(landmark_map, pose, 50.0)
  sample = train.make_train_sample(landmark_map, pose, meas, OffsetRange(), rng)
  prior = train.shifted_pose(pose, sample.target)
  back = geometry.compose_pose(prior, sample.target)
  assert (back.x, back.y, back.phi) == pytest.approx((pose.x, pose.y, pose.phi), abs=1e-9)
  # map points are expressed in the frame of the shifted pose
  world_pts = geometry.vehicle_to_world(prior, sample.map_pts)
  np.testing.assert_allclose(world_pts, landmark_map.query_points(prior.position, 100.0), atol=1e-9)


def test_zero_offset_sample_lines_up_with_measurements(landmark_map, route, rng):
  pose = route.points[300].pose
  meas = sensors.visible_landmarks(landmark_map, pose, 50.0)
  sample = train.make_train_sample(landmark_map, pose, meas, OffsetRange(0.0, 0.0, 0.0), rng)
  # every measurement is one of the map points
  for point in sample.meas:
    assert np.min(np.hypot(*(sample.map_pts - point).T)) < 1e-9


def test_pure_translation_shifts_map_points(small_map):
  pose = Pose(0.0, 0.0, 0.0)
  prior = train.shifted_pose(pose, PoseOffset(1.0, 0.0, 0.0))
  assert (prior.x, prior.y, prior.phi) == (-1.0, 0.0, 0.0)
  world_pts = small_map.positions
  np.testing.assert_allclose(geometry.world_to_vehicle(prior, world_pts), geometry.world_to_vehicle(pose, world_pts) + [1.0, 0.0], atol=1e-12)


def test_empty_measurements_rejected(landmark_map, route, rng):
  with pytest.raises(exception.SampleRejected):
    train.make_train_sample(landmark_map, route.points[0].pose, np.empty((0, 2)), OffsetRange(), rng)


def test_empty_map_neighborhood_rejected(landmark_map, rng):
  with pytest.raises(exception.SampleRejected):
    train.make_train_sample(landmark_map, Pose(1e5, 1e5, 0.0), np.ones((3, 2)), OffsetRange(), rng)


def test_loss_at_perfect_prediction():
  result = train.loss(np.zeros((4, 3)), np.zeros((4, 3)), 0.5, -0.5)
  assert result.total == pytest.approx(0.0)
  assert result.l_tran == 0.0 and result.l_rot == 0.0
  np.testing.assert_array_equal(result.d_pred, np.zeros((4, 3)))
  assert result.d_s_tran == 1.0


def test_loss_values():
  pred = np.array([[1.0, 0.0, 0.1], [0.0, 0.0, -0.1]])
  target = np.zeros((2, 3))
  result = train.loss(pred, target, 0.0, 0.0)
  assert result.l_tran == pytest.approx(0.5)
  assert result.l_rot == pytest.approx(0.01)
  assert result.total == pytest.approx(0.51)
  np.testing.assert_allclose(result.d_pred[0], [1.0, 0.0, 0.1])


def test_loss_wraps_heading_residual():
  pred = np.array([[0.0, 0.0, math.pi - 0.01]])
  target = np.array([[0.0, 0.0, -math.pi + 0.01]])
  assert train.loss(pred, target, 0.0, 0.0).l_rot == pytest.approx(0.02**2)


def test_loss_uncertainty_weighting():
  pred = np.array([[2.0, 0.0, 0.0]])
  result = train.loss(pred, np.zeros((1, 3)), math.log(4.0), 0.0)
  assert result.total == pytest.approx(1.0 + math.log(4.0))
  # the optimal s equals log L
  assert result.d_s_tran == pytest.approx(0.0)


def test_adam_first_step_moves_by_learning_rate(tiny_params):
  grads = net.DeepLocParams.from_tensors(tiny_params.config, [np.full_like(t, 0.5) for t in tiny_params.tensors()])
  updated, state = train.adam_step(tiny_params, grads, AdamState.zeros(tiny_params), 1e-3)
  assert state.step == 1
  for before, after in zip(tiny_params.tensors(), updated.tensors()):
    np.testing.assert_allclose(after - before, -1e-3, rtol=1e-6)


def test_adam_zero_gradient_leaves_params(tiny_params):
  grads = net.DeepLocParams.from_tensors(tiny_params.config, [np.zeros_like(t) for t in tiny_params.tensors()])
  updated, _ = train.adam_step(tiny_params, grads, AdamState.zeros(tiny_params), 1e-3)
  for before, after in zip(tiny_params.tensors(), updated.tensors()):
    np.testing.assert_array_equal(after, before)


def test_adam_rejects_mismatched_gradients(tiny_params):
  desk = net.init_params(NetConfig.desk(), 0)
  with pytest.raises(exception.InputError):
    train.adam_step(tiny_params, desk, AdamState.zeros(tiny_params), 1e-3)


def _fixed_samples(landmark_map, route, n, seed=0):
  rng = np.random.default_rng(seed)
  samples = []
  while len(samples) < n:
    pose = route.points[int(rng.integers(len(route)))].pose
    try:
      samples.append(train.make_train_sample(landmark_map, pose, sensors.visible_landmarks(landmark_map, pose, 50.0), OffsetRange(), rng))
    except exception.SampleRejected:
      pass
  return samples


def test_overfits_a_fixed_batch(landmark_map, route):
  config = NetConfig(meas_widths=(16, 32, 64), map_widths=(16, 32, 64), head_widths=(64, 32, 3), dropout_rate=0.0)
  samples = _fixed_samples(landmark_map, route, 16)
  params = net.init_params(config, 0)
  state = AdamState.zeros(params)
  train_config = TrainConfig(batch_size=16, learning_rate=3e-3)
  first = train.evaluate_loss(params, samples)
  for _ in range(3000):
    params, state, _ = train.train_step(params, state, samples, train_config)
  last = train.evaluate_loss(params, samples)
  assert last.l_tran + last.l_rot < 0.05*(first.l_tran + first.l_rot)
  assert last.l_rot < first.l_rot


def test_one_step_reaches_every_branch(landmark_map, route):
  params = net.init_params(NetConfig.desk(), 1)
  state = AdamState.zeros(params)
  samples = _fixed_samples(landmark_map, route, 4, seed=3)
  new, _, _ = train.train_step(params, state, samples, TrainConfig(batch_size=4, learning_rate=1e-3), rng=np.random.default_rng(0))
  for branch in ('mlp_meas', 'mlp_map', 'head'):
    before = getattr(params, branch).tensors()
    after = getattr(new, branch).tensors()
    assert any(not np.array_equal(a, b) for a, b in zip(before, after)), branch


def test_train_loop_trace_and_determinism(landmark_map, route):
  config = TrainConfig(batch_size=8, learning_rate=1e-3, steps=5, log_every=2, heldout_size=4)
  a = train.train_loop(landmark_map, route, NetConfig.tiny(), config)
  b = train.train_loop(landmark_map, route, NetConfig.tiny(), config)
  assert [row.step for row in a.trace] == [1, 2, 3, 4, 5]
  assert a.checkpoint.step == 5
  assert math.isnan(a.trace[0].heldout) and not math.isnan(a.trace[1].heldout)
  assert [r.loss for r in a.trace] == [r.loss for r in b.trace]
  for x, y in zip(a.checkpoint.params.tensors(), b.checkpoint.params.tensors()):
    np.testing.assert_array_equal(x, y)


def test_threads_do_not_change_the_result(landmark_map, route):
  config = TrainConfig(batch_size=8, learning_rate=1e-3, steps=3, heldout_size=2)
  serial = train.train_loop(landmark_map, route, NetConfig.tiny(), config)
  parallel = train.train_loop(landmark_map, route, NetConfig.tiny(), TrainConfig(**{**config.__dict__, 'threads': 4}))
  assert [r.loss for r in serial.trace] == [r.loss for r in parallel.trace]


def test_resume_continues_the_step_counter(landmark_map, route, tmp_path):
  config = TrainConfig(batch_size=8, learning_rate=1e-3, steps=4, heldout_size=2)
  straight = train.train_loop(landmark_map, route, NetConfig.tiny(), config)

  path = tmp_path/'checkpoint.json'
  train.train_loop(landmark_map, route, NetConfig.tiny(), TrainConfig(**{**config.__dict__, 'steps': 2}), checkpoint_path=path)
  resumed = train.train_loop(landmark_map, route, NetConfig.tiny(), TrainConfig(**{**config.__dict__, 'steps': 2}), resume=train.load_checkpoint(path))
  assert [row.step for row in resumed.trace] == [3, 4]
  assert resumed.checkpoint.step == 4
  for x, y in zip(straight.checkpoint.params.tensors(), resumed.checkpoint.params.tensors()):
    np.testing.assert_array_equal(x, y)


def test_training_aborts_without_landmarks(route):
  from deeploc.world import LandmarkMap
  config = TrainConfig(batch_size=4, steps=2, heldout_size=0)
  with pytest.raises(exception.TrainingAborted):
    train.train_loop(LandmarkMap(), route, NetConfig.tiny(), config)


def test_checkpoint_round_trip(tmp_path, tiny_params):
  checkpoint = train.Checkpoint(tiny_params.config, tiny_params, TrainConfig(), 17, 'abc', AdamState.zeros(tiny_params))
  path = tmp_path/'c.json'
  train.save_checkpoint(checkpoint, path)
  loaded = train.load_checkpoint(path)
  assert loaded.step == 17 and loaded.net_config == tiny_params.config
  assert loaded.train_config == TrainConfig()
  for x, y in zip(loaded.params.tensors(), tiny_params.tensors()):
    np.testing.assert_array_equal(x, y)


def test_truncated_checkpoint_rejected(tmp_path, tiny_params):
  path = tmp_path/'c.json'
  train.save_checkpoint(train.Checkpoint(tiny_params.config, tiny_params, TrainConfig()), path)
  path.write_text(path.read_text()[:200])
  with pytest.raises(exception.CheckpointError):
    train.load_checkpoint(path)


def test_checkpoint_version_mismatch_rejected(tmp_path, tiny_params):
  path = tmp_path/'c.json'
  train.save_checkpoint(train.Checkpoint(tiny_params.config, tiny_params, TrainConfig()), path)
  envelope = json.loads(path.read_text())
  envelope['version'] = 99
  path.write_text(json.dumps(envelope))
  with pytest.raises(exception.CheckpointError):
    train.load_checkpoint(path)


def test_tiny_checkpoint_rejected_by_paper_loader(tmp_path, tiny_params):
  path = tmp_path/'c.json'
  train.save_checkpoint(train.Checkpoint(tiny_params.config, tiny_params, TrainConfig()), path)
  with pytest.raises(exception.CheckpointError) as error:
    train.load_checkpoint(path, NetConfig.paper())
  assert 'D=8' in str(error.value) and 'D=1024' in str(error.value)


def test_trace_csv(tmp_path):
  path = tmp_path/'loss.csv'
  train.write_trace([train.TraceRow(1, 2.0, 1.5, 0.5, 0.0, 0.0)], path)
  lines = path.read_text().splitlines()
  assert lines[0] == 'step,loss,L_tran,L_rot,s_tran,s_rot,heldout'
  assert lines[1].startswith('1,2.0,1.5,0.5,')
