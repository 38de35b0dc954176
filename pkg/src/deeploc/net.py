'''Permutation-invariant pose-offset network

Two pointwise MLPs (measurements and map landmarks) lift every 2D point
to a D-dimensional feature, a column-wise max-pool turns each list into a
global feature vector, and the offset head maps the concatenation of the
two global vectors to (dx, dy, dphi).

All arithmetic is float64 numpy; gradients are computed by hand in
backward() and checked against finite differences in the tests.

Each input list is reduced to its unique rows in lexicographic order
before the pointwise MLP. The max-pool makes the output independent of
row order and duplicates; the canonical order makes that hold bit for
bit.
'''

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from deeploc.auxiliaries import exception
from deeploc.geometry import PoseOffset

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class NetConfig:
  meas_widths: Tuple[int, ...] = (32, 64, 128)
  map_widths: Tuple[int, ...] = (32, 64, 128)
  head_widths: Tuple[int, ...] = (128, 64, 3)
  dropout_rate: float = 0.3
  point_dim: int = 2

  def __post_init__(self):
    for name in ('meas_widths', 'map_widths', 'head_widths'):
      widths = tuple(int(w) for w in getattr(self, name))
      if not widths or min(widths) < 1:
        raise exception.InputError(name, f'invalid widths {widths}')
      object.__setattr__(self, name, widths)
    if self.meas_widths[-1] != self.map_widths[-1]:
      raise exception.InputError('map_widths', 'both pointwise MLPs must end in D')
    if self.head_widths[-1] != 3:
      raise exception.InputError('head_widths', 'the offset head must end in 3')
    if not 0.0 <= self.dropout_rate < 1.0:
      raise exception.InputError('dropout_rate', f'{self.dropout_rate} is not in [0, 1)')
    if self.point_dim != 2:
      raise exception.InputError('point_dim', 'only 2D points are supported')

  @property
  def D(self) -> int:
    return self.meas_widths[-1]

  @classmethod
  def desk(cls) -> 'NetConfig':
    return cls()

  @classmethod
  def paper(cls) -> 'NetConfig':
    '''D = 1024, about 1.8 million parameters'''
    return cls(meas_widths=(64, 256, 1024), map_widths=(64, 256, 1024), head_widths=(512, 256, 64, 3))

  @classmethod
  def tiny(cls) -> 'NetConfig':
    return cls(meas_widths=(4, 8, 8), map_widths=(4, 8, 8), head_widths=(8, 4, 3), dropout_rate=0.0)

#--------------------------------------------------------------------#

@dataclass
class Layer:
  weight: np.ndarray  # (out, in)
  bias: np.ndarray    # (out,)
  linear: bool = False

@dataclass
class MlpParams:
  layers: List[Layer]

  def __post_init__(self):
    for prev, layer in zip(self.layers, self.layers[1:]):
      if layer.weight.shape[1] != prev.weight.shape[0]:
        raise exception.InputError('layers', 'layer dimensions do not chain')
    for layer in self.layers:
      if layer.bias.shape != (layer.weight.shape[0],):
        raise exception.InputError('layers', 'bias does not match weight')

  @property
  def in_dim(self) -> int:
    return self.layers[0].weight.shape[1]

  @property
  def out_dim(self) -> int:
    return self.layers[-1].weight.shape[0]

  def tensors(self) -> List[np.ndarray]:
    out = []
    for layer in self.layers:
      out += [layer.weight, layer.bias]
    return out

def _mlp_shapes(in_dim, widths, linear_last):
  shapes = []
  for i, width in enumerate(widths):
    shapes.append((width, in_dim, linear_last and i == len(widths) - 1))
    in_dim = width
  return shapes

@dataclass
class DeepLocParams:
  '''All learnable state, including the two loss-weight scalars'''
  config: NetConfig
  mlp_meas: MlpParams
  mlp_map: MlpParams
  head: MlpParams
  s_tran: float = 0.0
  s_rot: float = 0.0

  def __post_init__(self):
    c = self.config
    expected = [(self.mlp_meas, _mlp_shapes(c.point_dim, c.meas_widths, False)),
                (self.mlp_map, _mlp_shapes(c.point_dim, c.map_widths, False)),
                (self.head, _mlp_shapes(2*c.D, c.head_widths, True))]
    for mlp, shapes in expected:
      got = [(layer.weight.shape[0], layer.weight.shape[1], layer.linear) for layer in mlp.layers]
      if got != shapes:
        raise exception.InputError('params', f'dimensions {got} do not match the configuration {shapes}')

  def tensors(self) -> List[np.ndarray]:
    '''Views of every parameter array, s terms last as shape (1,) arrays'''
    return self.mlp_meas.tensors() + self.mlp_map.tensors() + self.head.tensors() + [np.array([self.s_tran]), np.array([self.s_rot])]

  @classmethod
  def from_tensors(cls, config: NetConfig, tensors: Sequence[np.ndarray]) -> 'DeepLocParams':
    tensors = list(tensors)
    mlps = []
    for in_dim, widths, linear_last in ((config.point_dim, config.meas_widths, False),
                                        (config.point_dim, config.map_widths, False),
                                        (2*config.D, config.head_widths, True)):
      layers = []
      for out, fan_in, linear in _mlp_shapes(in_dim, widths, linear_last):
        if len(tensors) < 2:
          raise exception.InputError('tensors', 'too few tensors for the configuration')
        weight = np.asarray(tensors.pop(0), dtype=np.float64)
        bias = np.asarray(tensors.pop(0), dtype=np.float64)
        if weight.shape != (out, fan_in) or bias.shape != (out,):
          raise exception.InputError('tensors', f'expected {(out, fan_in)}, got {weight.shape}')
        layers.append(Layer(weight, bias, linear))
      mlps.append(MlpParams(layers))
    if len(tensors) != 2:
      raise exception.InputError('tensors', 'expected exactly the two s scalars after the layers')
    return cls(config, *mlps, float(np.asarray(tensors[0]).reshape(-1)[0]), float(np.asarray(tensors[1]).reshape(-1)[0]))

  def copy(self) -> 'DeepLocParams':
    return DeepLocParams.from_tensors(self.config, [t.copy() for t in self.tensors()])

def param_count(config: NetConfig) -> int:
  '''Number of learnable scalars, the two s terms included'''
  count = 2
  for in_dim, widths in ((config.point_dim, config.meas_widths), (config.point_dim, config.map_widths), (2*config.D, config.head_widths)):
    for out, fan_in, _ in _mlp_shapes(in_dim, widths, False):
      count += out*fan_in + out
  return count

def init_params(config: NetConfig, seed: int) -> DeepLocParams:
  '''Glorot-uniform weights, zero biases, s_tran = s_rot = 0'''
  rng = np.random.default_rng(seed)
  tensors = []
  for in_dim, widths in ((config.point_dim, config.meas_widths), (config.point_dim, config.map_widths), (2*config.D, config.head_widths)):
    for out, fan_in, _ in _mlp_shapes(in_dim, widths, False):
      bound = np.sqrt(6.0/(fan_in + out))
      tensors += [rng.uniform(-bound, bound, (out, fan_in)), np.zeros(out)]
  return DeepLocParams.from_tensors(config, tensors + [np.zeros(1), np.zeros(1)])

#--------------------------------------------------------------------#

@dataclass
class MlpCache:
  inputs: List[np.ndarray] = field(default_factory=list)
  pre: List[np.ndarray] = field(default_factory=list)
  masks: List[Optional[np.ndarray]] = field(default_factory=list)

def _mlp_forward(mlp: MlpParams, x: np.ndarray, dropout_rate: float, train_mode: bool, rng) -> Tuple[np.ndarray, MlpCache]:
  '''ReLU after every non-linear layer, dropout after every layer but the last'''
  cache = MlpCache()
  last = len(mlp.layers) - 1
  a = x
  for i, layer in enumerate(mlp.layers):
    cache.inputs.append(a)
    z = a @ layer.weight.T + layer.bias
    cache.pre.append(z)
    a = z if layer.linear else np.maximum(z, 0.0)
    mask = None
    if train_mode and dropout_rate > 0.0 and i < last:
      if rng is None:
        raise exception.InputError('rng', 'dropout in train mode needs a generator')
      mask = (rng.random(a.shape) >= dropout_rate)/(1.0 - dropout_rate)
      a = a*mask
    cache.masks.append(mask)
  return a, cache

def _mlp_backward(mlp: MlpParams, cache: MlpCache, d_out: np.ndarray, need_input: bool = False):
  grads = []
  d_a = d_out
  for i in range(len(mlp.layers) - 1, -1, -1):
    layer = mlp.layers[i]
    if cache.masks[i] is not None:
      d_a = d_a*cache.masks[i]
    d_z = d_a if layer.linear else d_a*(cache.pre[i] > 0.0)
    grads.append(Layer(d_z.T @ cache.inputs[i], d_z.sum(axis=0), layer.linear))
    if i > 0 or need_input:
      d_a = d_z @ layer.weight
  grads.reverse()
  return MlpParams(grads), (d_a if need_input else None)

def pointwise_forward(mlp: MlpParams, points: np.ndarray, dropout_rate: float = 0.0, train_mode: bool = False, rng=None) -> Tuple[np.ndarray, MlpCache]:
  '''The same MLP applied to every row of an (n, 2) array'''
  points = np.asarray(points, dtype=np.float64).reshape(-1, mlp.in_dim)
  if points.shape[0] == 0:
    raise exception.EmptyPointSet('points')
  return _mlp_forward(mlp, points, dropout_rate, train_mode, rng)

def maxpool_columns(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
  '''Column maxima and their row indices; ties go to the smallest row'''
  features = np.asarray(features)
  if features.ndim != 2 or features.shape[0] == 0:
    raise exception.EmptyPointSet('features')
  argmax = np.argmax(features, axis=0)
  return features[argmax, np.arange(features.shape[1])], argmax

#--------------------------------------------------------------------#

@dataclass
class ForwardCache:
  batch: int
  meas: MlpCache
  map: MlpCache
  head: MlpCache
  meas_rows: int
  map_rows: int
  meas_argmax: np.ndarray  # (batch, D) row indices into the stacked features
  map_argmax: np.ndarray
  meas_inputs: List[np.ndarray]
  map_inputs: List[np.ndarray]

def canonical_points(points: np.ndarray, which: str = 'points') -> np.ndarray:
  '''Unique rows in lexicographic order'''
  points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  if points.shape[0] == 0:
    raise exception.EmptyPointSet(which)
  return np.unique(points, axis=0)

def _pool_segments(features, offsets):
  pooled = np.empty((len(offsets) - 1, features.shape[1]))
  argmax = np.empty((len(offsets) - 1, features.shape[1]), dtype=np.int64)
  for b in range(len(offsets) - 1):
    pooled[b], local = maxpool_columns(features[offsets[b]:offsets[b + 1]])
    argmax[b] = local + offsets[b]
  return pooled, argmax

def forward_batch(params: DeepLocParams, samples: Sequence[Tuple[np.ndarray, np.ndarray]], train_mode: bool = False, rng=None) -> Tuple[np.ndarray, ForwardCache]:
  '''(batch, 3) raw offset predictions for a list of (meas, map_pts) pairs'''
  if len(samples) == 0:
    raise exception.InputError('samples', 'empty batch')
  meas = [canonical_points(m, 'measurements') for m, _ in samples]
  maps = [canonical_points(m, 'map landmarks') for _, m in samples]
  meas_offsets = np.concatenate([[0], np.cumsum([m.shape[0] for m in meas])])
  map_offsets = np.concatenate([[0], np.cumsum([m.shape[0] for m in maps])])

  rate = params.config.dropout_rate
  meas_features, meas_cache = pointwise_forward(params.mlp_meas, np.concatenate(meas), rate, train_mode, rng)
  map_features, map_cache = pointwise_forward(params.mlp_map, np.concatenate(maps), rate, train_mode, rng)
  meas_global, meas_argmax = _pool_segments(meas_features, meas_offsets)
  map_global, map_argmax = _pool_segments(map_features, map_offsets)

  out, head_cache = _mlp_forward(params.head, np.concatenate([meas_global, map_global], axis=1), rate, train_mode, rng)
  cache = ForwardCache(len(samples), meas_cache, map_cache, head_cache,
                       meas_features.shape[0], map_features.shape[0],
                       meas_argmax, map_argmax, meas, maps)
  return out, cache

def forward(params: DeepLocParams, meas: np.ndarray, map_pts: np.ndarray, train_mode: bool = False, rng=None) -> Tuple[PoseOffset, ForwardCache]:
  '''Offset prediction for one measurement list and one map list (vehicle frame)'''
  out, cache = forward_batch(params, [(meas, map_pts)], train_mode, rng)
  return PoseOffset(*out[0]), cache

def predict_batch(params: DeepLocParams, samples: Sequence[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
  return forward_batch(params, samples)[0]

def backward(params: DeepLocParams, cache: ForwardCache, d_offset: np.ndarray, d_s_tran: float = 0.0, d_s_rot: float = 0.0) -> DeepLocParams:
  '''Gradients of a scalar objective, given its gradient w.r.t. the raw predictions'''
  d_offset = np.asarray(d_offset, dtype=np.float64)
  if d_offset.ndim == 1:
    d_offset = d_offset.reshape(1, -1)
  if d_offset.shape != (cache.batch, 3):
    raise exception.InputError('d_offset', f'shape {d_offset.shape} does not match the batch ({cache.batch}, 3)')
  D = params.config.D
  if cache.meas_argmax.shape != (cache.batch, D):
    raise exception.InputError('cache', 'cache does not match the parameters')

  head_grads, d_concat = _mlp_backward(params.head, cache.head, d_offset, need_input=True)
  columns = np.arange(D)

  d_meas = np.zeros((cache.meas_rows, D))
  d_meas[cache.meas_argmax, columns] = d_concat[:, :D]
  meas_grads, _ = _mlp_backward(params.mlp_meas, cache.meas, d_meas)

  d_map = np.zeros((cache.map_rows, D))
  d_map[cache.map_argmax, columns] = d_concat[:, D:]
  map_grads, _ = _mlp_backward(params.mlp_map, cache.map, d_map)

  return replace(params, mlp_meas=meas_grads, mlp_map=map_grads, head=head_grads, s_tran=float(d_s_tran), s_rot=float(d_s_rot))
