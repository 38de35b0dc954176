import numpy as np
import pytest

from deeploc import net, train
from deeploc.auxiliaries import exception
from deeploc.net import DeepLocParams, NetConfig


def _inputs(rng, low=5, high=40):
  meas = rng.uniform(-50.0, 50.0, (int(rng.integers(low, high)), 2))
  map_pts = rng.uniform(-100.0, 100.0, (int(rng.integers(low, high)), 2))
  return meas, map_pts


def test_param_count_presets():
  assert net.param_count(NetConfig.paper()) == 1757061
  for config in (NetConfig.desk(), NetConfig.tiny(), NetConfig.paper()):
    params = net.init_params(config, 0)
    assert net.param_count(config) == sum(t.size for t in params.tensors())


def test_init_is_deterministic():
  a = net.init_params(NetConfig.tiny(), 5).tensors()
  b = net.init_params(NetConfig.tiny(), 5).tensors()
  for x, y in zip(a, b):
    np.testing.assert_array_equal(x, y)


def test_config_rejects_mismatched_widths():
  with pytest.raises(exception.InputError):
    NetConfig(meas_widths=(8, 16), map_widths=(8, 32))
  with pytest.raises(exception.InputError):
    NetConfig(head_widths=(64, 2))
  with pytest.raises(exception.InputError):
    NetConfig(dropout_rate=1.0)


def test_from_tensors_rejects_wrong_dimensions():
  tensors = net.init_params(NetConfig.tiny(), 0).tensors()
  with pytest.raises(exception.InputError):
    DeepLocParams.from_tensors(NetConfig.desk(), tensors)
  with pytest.raises(exception.InputError):
    DeepLocParams.from_tensors(NetConfig.tiny(), tensors[:-1])


def test_permutation_invariance_is_exact(rng):
  params = net.init_params(NetConfig.desk(), 1)
  for _ in range(100):
    meas, map_pts = _inputs(rng)
    out, _ = net.forward(params, meas, map_pts)
    shuffled, _ = net.forward(params, rng.permutation(meas), rng.permutation(map_pts))
    assert shuffled == out


def test_duplicate_invariance_is_exact(rng):
  params = net.init_params(NetConfig.desk(), 1)
  for _ in range(100):
    meas, map_pts = _inputs(rng)
    out, _ = net.forward(params, meas, map_pts)
    extra = rng.integers(0, meas.shape[0], 7)
    doubled, _ = net.forward(params, np.concatenate([meas, meas[extra]]), np.concatenate([map_pts, map_pts]))
    assert doubled == out


def test_empty_point_list_rejected(tiny_params):
  with pytest.raises(exception.EmptyPointSet):
    net.forward(tiny_params, np.empty((0, 2)), np.ones((3, 2)))
  with pytest.raises(exception.EmptyPointSet):
    net.forward(tiny_params, np.ones((3, 2)), np.empty((0, 2)))


def test_single_point_inputs(tiny_params):
  out, _ = net.forward(tiny_params, np.array([[1.0, 2.0]]), np.array([[3.0, -1.0]]))
  assert np.all(np.isfinite(out.as_array()))


def test_maxpool_ties_go_to_first_row():
  pooled, argmax = net.maxpool_columns(np.array([[1.0, 5.0], [1.0, 2.0], [0.0, 5.0]]))
  np.testing.assert_array_equal(pooled, [1.0, 5.0])
  np.testing.assert_array_equal(argmax, [0, 0])


def test_batch_matches_single_forward(rng, tiny_params):
  samples = [_inputs(rng) for _ in range(6)]
  batch = net.predict_batch(tiny_params, samples)
  single = np.array([net.forward(tiny_params, m, p)[0].as_array() for m, p in samples])
  np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-12)


def test_dropout_only_in_train_mode(rng):
  config = NetConfig(meas_widths=(8, 16), map_widths=(8, 16), head_widths=(16, 3), dropout_rate=0.5)
  params = net.init_params(config, 2)
  meas, map_pts = _inputs(rng)
  a, _ = net.forward(params, meas, map_pts)
  b, _ = net.forward(params, meas, map_pts)
  assert a == b
  c, _ = net.forward(params, meas, map_pts, train_mode=True, rng=np.random.default_rng(0))
  assert c != a
  d, _ = net.forward(params, meas, map_pts, train_mode=True, rng=np.random.default_rng(0))
  assert c == d


def test_dropout_needs_a_generator(rng):
  params = net.init_params(NetConfig.desk(), 2)
  with pytest.raises(exception.InputError):
    net.forward(params, *_inputs(rng), train_mode=True)


def _objective(params, samples, targets):
  pred, _ = net.forward_batch(params, samples)
  return train.loss(pred, targets, params.s_tran, params.s_rot).total


def test_gradients_match_finite_differences(rng):
  config = NetConfig.tiny()
  tensors = net.init_params(config, 4).tensors()
  # zero biases put inactive rows exactly on the ReLU kink
  for k in range(1, len(tensors) - 2, 2):
    tensors[k] = tensors[k] + rng.uniform(-0.1, 0.1, tensors[k].shape)
  tensors[-2] = np.array([0.3])
  tensors[-1] = np.array([-0.2])
  params = DeepLocParams.from_tensors(config, tensors)
  samples = [_inputs(rng) for _ in range(10)]
  targets = rng.uniform(-2.0, 2.0, (10, 3))*np.array([1.0, 1.0, 0.17])

  pred, cache = net.forward_batch(params, samples)
  result = train.loss(pred, targets, params.s_tran, params.s_rot)
  analytic = net.backward(params, cache, result.d_pred, result.d_s_tran, result.d_s_rot).tensors()

  h = 1e-6
  worst = 0.0
  for k, tensor in enumerate(tensors):
    for index in np.ndindex(tensor.shape):
      plus = [t.copy() for t in tensors]
      minus = [t.copy() for t in tensors]
      plus[k][index] += h
      minus[k][index] -= h
      numeric = (_objective(DeepLocParams.from_tensors(config, plus), samples, targets) -
                 _objective(DeepLocParams.from_tensors(config, minus), samples, targets))/(2.0*h)
      a = analytic[k][index]
      worst = max(worst, abs(a - numeric)/max(abs(a), abs(numeric), 1e-4))
  assert worst < 1e-4


def test_backward_rejects_wrong_gradient_shape(rng, tiny_params):
  _, cache = net.forward_batch(tiny_params, [_inputs(rng), _inputs(rng)])
  with pytest.raises(exception.InputError):
    net.backward(tiny_params, cache, np.zeros((3, 3)))
