'''Training: offset sampling, the two-task loss, ADAM and checkpoints

Training samples are built by displacing the true pose by a random
offset, loading the map around the displaced pose and expressing it in
the displaced vehicle frame. The network learns the offset that brings
the displaced pose back onto the truth:

  compose_pose(shifted_pose, target) == true_pose

Randomness is keyed, never shared: sample slot k of step n draws from
default_rng([seed, 0, n, k]), dropout of step n from
default_rng([seed, 1, n]). Generating a batch in parallel therefore
gives the same result as generating it sequentially.
'''

import base64
import csv
import hashlib
import json
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from deeploc import geometry, net, sensors
from deeploc.auxiliaries import exception
from deeploc.geometry import Pose, PoseOffset
from deeploc.net import DeepLocParams, NetConfig
from deeploc.sensors import MeasurementSet, SensorConfig
from deeploc.world import LandmarkMap, Trajectory

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'deeploc-checkpoint'
CHECKPOINT_VERSION = 1
TRACE_HEADER = ['step', 'loss', 'L_tran', 'L_rot', 's_tran', 's_rot', 'heldout']

LOAD_RADIUS = 100.0

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class OffsetRange:
  '''Half-widths of the uniform offset distribution (m, m, rad)'''
  sigma_x: float = 2.0
  sigma_y: float = 2.0
  sigma_phi: float = math.radians(10.0)

  def __post_init__(self):
    for name in ('sigma_x', 'sigma_y', 'sigma_phi'):
      value = getattr(self, name)
      if not (math.isfinite(value) and value >= 0.0):
        raise exception.InputError(name, f'{value} must be finite and non-negative')

  def std(self) -> np.ndarray:
    '''Standard deviation of the offset prior per component'''
    return np.array([self.sigma_x, self.sigma_y, self.sigma_phi])/math.sqrt(3.0)

OFFSET_PRESETS = {'2m-10deg': OffsetRange(2.0, 2.0, math.radians(10.0)),
                  '1m-4deg': OffsetRange(1.0, 1.0, math.radians(4.0)),
                  '0.5m-2deg': OffsetRange(0.5, 0.5, math.radians(2.0))}

@dataclass(frozen=True)
class TrainConfig:
  batch_size: int = 500
  learning_rate: float = 1e-5
  steps: int = 1000
  offset_range: OffsetRange = OffsetRange()
  seed: int = 0
  beta1: float = 0.9
  beta2: float = 0.999
  eps: float = 1e-8
  # None keeps the rate of the network configuration
  dropout_rate: Optional[float] = None
  load_radius: float = LOAD_RADIUS
  # 'map': landmarks in the field of view serve as measurements
  # 'sensor': simulated sensor output with impairments
  measurements: str = 'map'
  log_every: int = 100
  checkpoint_every: int = 0
  heldout_size: int = 64
  rejection_window: int = 500
  threads: int = 1

  def __post_init__(self):
    if self.batch_size < 1 or self.steps < 0 or not self.learning_rate > 0.0:
      raise exception.InputError('train', 'batch_size, steps and learning_rate must be positive')
    if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.eps > 0.0):
      raise exception.InputError('train', 'invalid ADAM constants')
    if self.measurements not in ('map', 'sensor'):
      raise exception.InputError('measurements', f'unknown regime {self.measurements}')
    if not self.load_radius > 0.0 or self.threads < 1 or self.log_every < 1:
      raise exception.InputError('train', 'load_radius, threads and log_every must be positive')

@dataclass(frozen=True, eq=False)
class TrainSample:
  meas: np.ndarray
  map_pts: np.ndarray
  target: PoseOffset

#--------------------------------------------------------------------#

def sample_offset(offset_range: OffsetRange, rng: np.random.Generator) -> PoseOffset:
  '''Each component uniform on its symmetric interval'''
  r = offset_range
  return PoseOffset(rng.uniform(-r.sigma_x, r.sigma_x),
                    rng.uniform(-r.sigma_y, r.sigma_y),
                    rng.uniform(-r.sigma_phi, r.sigma_phi))

def shifted_pose(true_pose: Pose, offset: PoseOffset) -> Pose:
  '''The pose from which `offset` leads back to true_pose'''
  return geometry.compose_pose(true_pose, -offset)

def make_train_sample(landmark_map: LandmarkMap, true_pose: Pose, meas, offset_range: OffsetRange, rng: np.random.Generator, load_radius: float = LOAD_RADIUS) -> TrainSample:
  '''Raises SampleRejected if either point list would be empty'''
  points = meas.points if isinstance(meas, MeasurementSet) else np.asarray(meas, dtype=np.float64).reshape(-1, 2)
  if points.shape[0] == 0:
    raise exception.SampleRejected('no measurements')
  offset = sample_offset(offset_range, rng)
  prior = shifted_pose(true_pose, offset)
  world = landmark_map.query_points(prior.position, load_radius)
  if world.shape[0] == 0:
    raise exception.SampleRejected(f'no map landmarks within {load_radius} m')
  return TrainSample(points.copy(), geometry.world_to_vehicle(prior, world), offset)

#--------------------------------------------------------------------#

@dataclass(frozen=True, eq=False)
class LossResult:
  total: float
  l_tran: float
  l_rot: float
  d_pred: np.ndarray
  d_s_tran: float
  d_s_rot: float

def _as_rows(values) -> np.ndarray:
  if isinstance(values, PoseOffset):
    return values.as_array().reshape(1, 3)
  if isinstance(values, (list, tuple)) and values and isinstance(values[0], PoseOffset):
    return np.array([v.as_array() for v in values])
  return np.asarray(values, dtype=np.float64).reshape(-1, 3)

def loss(pred, target, s_tran: float, s_rot: float) -> LossResult:
  '''L = L_tran exp(-s_tran) + s_tran + L_rot exp(-s_rot) + s_rot

  L_tran and L_rot are batch means of squared residuals; the heading
  residual is wrapped to (-pi, pi] before squaring.
  '''
  pred = _as_rows(pred)
  target = _as_rows(target)
  if pred.shape != target.shape:
    raise exception.InputError('target', f'shape {target.shape} does not match {pred.shape}')
  batch = pred.shape[0]
  residual = pred - target
  residual[:, 2] = geometry.wrap_angles(residual[:, 2])

  l_tran = float(np.mean(residual[:, 0]**2) + np.mean(residual[:, 1]**2))
  l_rot = float(np.mean(residual[:, 2]**2))
  w_tran = math.exp(-s_tran)
  w_rot = math.exp(-s_rot)
  total = l_tran*w_tran + s_tran + l_rot*w_rot + s_rot

  d_pred = 2.0*residual/batch
  d_pred[:, :2] *= w_tran
  d_pred[:, 2] *= w_rot
  return LossResult(total, l_tran, l_rot, d_pred, 1.0 - l_tran*w_tran, 1.0 - l_rot*w_rot)

#--------------------------------------------------------------------#

@dataclass(eq=False)
class AdamState:
  m: List[np.ndarray]
  v: List[np.ndarray]
  step: int = 0

  @classmethod
  def zeros(cls, params: DeepLocParams) -> 'AdamState':
    tensors = params.tensors()
    return cls([np.zeros_like(t) for t in tensors], [np.zeros_like(t) for t in tensors], 0)

def adam_step(params: DeepLocParams, grads: DeepLocParams, state: AdamState, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
  '''One bias-corrected ADAM update; returns new params and state'''
  values = params.tensors()
  gradients = grads.tensors()
  if len(values) != len(gradients) or len(values) != len(state.m) or \
     any(p.shape != g.shape or p.shape != m.shape for p, g, m in zip(values, gradients, state.m)):
    raise exception.InputError('grads', 'gradient shapes do not match the parameters')

  step = state.step + 1
  correction1 = 1.0 - beta1**step
  correction2 = 1.0 - beta2**step
  new_values, new_m, new_v = [], [], []
  for p, g, m, v in zip(values, gradients, state.m, state.v):
    m = beta1*m + (1.0 - beta1)*g
    v = beta2*v + (1.0 - beta2)*g*g
    new_values.append(p - lr*(m/correction1)/(np.sqrt(v/correction2) + eps))
    new_m.append(m)
    new_v.append(v)
  return DeepLocParams.from_tensors(params.config, new_values), AdamState(new_m, new_v, step)

def train_step(params: DeepLocParams, state: AdamState, samples: Sequence[TrainSample], config: TrainConfig, rng=None):
  '''forward, loss, backward and ADAM on one batch'''
  pred, cache = net.forward_batch(params, [(s.meas, s.map_pts) for s in samples], train_mode=True, rng=rng)
  result = loss(pred, [s.target for s in samples], params.s_tran, params.s_rot)
  if not math.isfinite(result.total):
    raise exception.NumericError(f'non-finite loss {result.total} (L_tran={result.l_tran}, L_rot={result.l_rot})')
  grads = net.backward(params, cache, result.d_pred, result.d_s_tran, result.d_s_rot)
  params, state = adam_step(params, grads, state, config.learning_rate, config.beta1, config.beta2, config.eps)
  return params, state, result

def evaluate_loss(params: DeepLocParams, samples: Sequence[TrainSample]) -> LossResult:
  pred = net.predict_batch(params, [(s.meas, s.map_pts) for s in samples])
  return loss(pred, [s.target for s in samples], params.s_tran, params.s_rot)

#--------------------------------------------------------------------#

@dataclass(eq=False)
class Checkpoint:
  net_config: NetConfig
  params: DeepLocParams
  train_config: TrainConfig
  step: int = 0
  rng_digest: str = ''
  adam: Optional[AdamState] = None
  version: int = CHECKPOINT_VERSION

@dataclass(frozen=True)
class TraceRow:
  step: int
  loss: float
  l_tran: float
  l_rot: float
  s_tran: float
  s_rot: float
  heldout: float = float('nan')

@dataclass(eq=False)
class TrainResult:
  checkpoint: Checkpoint
  trace: List[TraceRow] = field(default_factory=list)

def rng_digest(seed: int, step: int) -> str:
  '''Fingerprint of the generator state the next step starts from'''
  state = np.random.default_rng([seed, 0, step, 0]).bit_generator.state
  return hashlib.sha256(json.dumps(state, sort_keys=True).encode()).hexdigest()[:16]

class SampleSource:
  '''Draws training samples at random time-steps of a trajectory'''
  def __init__(self, landmark_map: LandmarkMap, trajectory: Trajectory, config: TrainConfig, sensor_config: Optional[SensorConfig] = None, max_attempts: int = 100):
    self._map = landmark_map
    self._trajectory = trajectory
    self._config = config
    self._sensor = sensor_config if sensor_config is not None else SensorConfig()
    self._max_attempts = max_attempts
    self._window = deque(maxlen=config.rejection_window)

  def measure(self, pose: Pose, rng) -> np.ndarray:
    if self._config.measurements == 'map':
      return sensors.visible_landmarks(self._map, pose, self._sensor.fov_radius)
    return sensors.simulate_measurements(self._map, pose, self._sensor, rng).points

  def draw(self, key: Sequence[int]):
    '''(sample, rejected draws) from the stream identified by key'''
    rng = np.random.default_rng(list(key))
    rejected = 0
    for _ in range(self._max_attempts):
      pose = self._trajectory.points[int(rng.integers(len(self._trajectory)))].pose
      try:
        return make_train_sample(self._map, pose, self.measure(pose, rng), self._config.offset_range, rng, self._config.load_radius), rejected
      except exception.SampleRejected as error:
        _logger.debug('sample %s rejected: %s', key, error.reason)
        rejected += 1
    raise exception.TrainingAborted(f'no valid sample after {self._max_attempts} draws for {key}')

  def batch(self, keys: Sequence[Sequence[int]], executor: Optional[ThreadPoolExecutor] = None) -> List[TrainSample]:
    results = list(executor.map(self.draw, keys)) if executor else [self.draw(key) for key in keys]
    for _, rejected in results:
      self._window.extend([True]*rejected + [False])
    if len(self._window) == self._window.maxlen:
      rate = sum(self._window)/len(self._window)
      if rate > 0.9:
        raise exception.TrainingAborted(f'sample rejection rate {rate:.0%} over the last {len(self._window)} draws; '
                                        'is the map empty around the trajectory?')
    return [sample for sample, _ in results]

def train_loop(landmark_map: LandmarkMap, trajectory: Trajectory, net_config: NetConfig, config: TrainConfig,
               sensor_config: Optional[SensorConfig] = None, resume: Optional[Checkpoint] = None,
               checkpoint_path=None, on_step: Optional[Callable[[TraceRow], None]] = None) -> TrainResult:
  '''Runs config.steps ADAM steps on freshly drawn batches'''
  if config.dropout_rate is not None:
    net_config = replace(net_config, dropout_rate=config.dropout_rate)

  if resume is not None:
    if resume.net_config.D != net_config.D or resume.net_config != replace(net_config, dropout_rate=resume.net_config.dropout_rate):
      raise exception.CheckpointError(f'checkpoint network {resume.net_config} does not match {net_config}')
    params = DeepLocParams.from_tensors(net_config, resume.params.tensors())
    state = resume.adam if resume.adam is not None else AdamState.zeros(params)
    start = resume.step
  else:
    params = net.init_params(net_config, config.seed)
    state = AdamState.zeros(params)
    start = 0

  source = SampleSource(landmark_map, trajectory, config, sensor_config)
  heldout = [source.draw([config.seed, 2, slot])[0] for slot in range(config.heldout_size)]
  executor = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None

  result = TrainResult(Checkpoint(net_config, params, config, start, rng_digest(config.seed, start), state))
  _logger.info('training %d parameters for %d steps from step %d (batch %d, lr %g)',
               net.param_count(net_config), config.steps, start, config.batch_size, config.learning_rate)
  try:
    for step in range(start, start + config.steps):
      samples = source.batch([(config.seed, 0, step, slot) for slot in range(config.batch_size)], executor)
      params, state, batch_loss = train_step(params, state, samples, config, np.random.default_rng([config.seed, 1, step]))

      heldout_loss = float('nan')
      done = step + 1
      if done % config.log_every == 0 or done == start + config.steps:
        if heldout:
          evaluation = evaluate_loss(params, heldout)
          heldout_loss = evaluation.l_tran + evaluation.l_rot
        _logger.info('step %d: loss %.5f L_tran %.5f L_rot %.6f s_tran %.3f s_rot %.3f heldout %.5f',
                     done, batch_loss.total, batch_loss.l_tran, batch_loss.l_rot, params.s_tran, params.s_rot, heldout_loss)
      row = TraceRow(done, batch_loss.total, batch_loss.l_tran, batch_loss.l_rot, params.s_tran, params.s_rot, heldout_loss)
      result.trace.append(row)
      if on_step:
        on_step(row)

      result.checkpoint = Checkpoint(net_config, params, config, done, rng_digest(config.seed, done), state)
      if checkpoint_path and config.checkpoint_every and done % config.checkpoint_every == 0:
        save_checkpoint(result.checkpoint, checkpoint_path)
  except exception.TrainingAborted:
    raise
  except exception.NumericError as error:
    raise exception.TrainingAborted(f'training diverged at step {step + 1}: {error.msg}')
  finally:
    if executor:
      executor.shutdown()

  if checkpoint_path:
    save_checkpoint(result.checkpoint, checkpoint_path)
  return result

#--------------------------------------------------------------------#

def _encode(array: np.ndarray) -> dict:
  array = np.ascontiguousarray(array, dtype='<f8')
  return {'shape': list(array.shape), 'data': base64.b64encode(array.tobytes()).decode('ascii')}

def _decode(entry: dict) -> np.ndarray:
  raw = base64.b64decode(entry['data'], validate=True)
  shape = tuple(int(d) for d in entry['shape'])
  array = np.frombuffer(raw, dtype='<f8')
  if array.size != int(np.prod(shape)):
    raise exception.CheckpointError(f'tensor of shape {shape} has {array.size} values')
  return array.reshape(shape).astype(np.float64)

def _net_config_dict(config: NetConfig) -> dict:
  return {key: list(value) if isinstance(value, tuple) else value for key, value in asdict(config).items()}

def save_checkpoint(checkpoint: Checkpoint, path) -> None:
  '''Versioned JSON envelope with base64 little-endian float64 tensors'''
  train_config = asdict(checkpoint.train_config)
  envelope = {'format': CHECKPOINT_FORMAT,
              'version': checkpoint.version,
              'net_config': _net_config_dict(checkpoint.net_config),
              'train_config': train_config,
              'step': checkpoint.step,
              'rng_digest': checkpoint.rng_digest,
              'tensors': [_encode(t) for t in checkpoint.params.tensors()]}
  if checkpoint.adam is not None:
    envelope['adam'] = {'step': checkpoint.adam.step,
                        'm': [_encode(t) for t in checkpoint.adam.m],
                        'v': [_encode(t) for t in checkpoint.adam.v]}
  with open(path, 'w') as json_file:
    json.dump(envelope, json_file, indent=1, sort_keys=True)
    json_file.write('\n')

def load_checkpoint(path, expected: Optional[NetConfig] = None) -> Checkpoint:
  '''Raises CheckpointError for corrupt, foreign or mismatching files'''
  try:
    with open(path) as json_file:
      envelope = json.load(json_file)
  except (ValueError, UnicodeDecodeError) as error:
    raise exception.CheckpointError(f'{path}: corrupt checkpoint ({error})')

  if not isinstance(envelope, dict) or envelope.get('format') != CHECKPOINT_FORMAT:
    raise exception.CheckpointError(f'{path}: not a checkpoint')
  if envelope.get('version') != CHECKPOINT_VERSION:
    raise exception.CheckpointError(f'{path}: unsupported checkpoint version {envelope.get("version")}, expected {CHECKPOINT_VERSION}')

  try:
    net_config = NetConfig(**{key: tuple(value) if isinstance(value, list) else value for key, value in envelope['net_config'].items()})
    train_dict = dict(envelope['train_config'])
    train_dict['offset_range'] = OffsetRange(**train_dict['offset_range'])
    train_config = TrainConfig(**train_dict)
    tensors = [_decode(entry) for entry in envelope['tensors']]
    adam = None
    if 'adam' in envelope:
      adam = AdamState([_decode(e) for e in envelope['adam']['m']], [_decode(e) for e in envelope['adam']['v']], int(envelope['adam']['step']))
    step = int(envelope['step'])
    digest = str(envelope['rng_digest'])
  except (KeyError, TypeError, ValueError) as error:
    raise exception.CheckpointError(f'{path}: corrupt checkpoint ({error!r})')
  except exception.InputError as error:
    raise exception.CheckpointError(f'{path}: invalid configuration ({error})')

  if expected is not None and (expected.meas_widths, expected.map_widths, expected.head_widths) != \
     (net_config.meas_widths, net_config.map_widths, net_config.head_widths):
    raise exception.CheckpointError(f'{path}: dimension mismatch, checkpoint has D={net_config.D} widths '
                                    f'{net_config.meas_widths}/{net_config.map_widths}/{net_config.head_widths}, '
                                    f'expected D={expected.D} widths {expected.meas_widths}/{expected.map_widths}/{expected.head_widths}')
  try:
    params = DeepLocParams.from_tensors(net_config, tensors)
  except exception.InputError as error:
    raise exception.CheckpointError(f'{path}: dimension mismatch ({error})')
  if adam is not None and [m.shape for m in adam.m] != [t.shape for t in params.tensors()]:
    raise exception.CheckpointError(f'{path}: ADAM moments do not match the parameters')
  return Checkpoint(net_config, params, train_config, step, digest, adam, envelope['version'])

def write_trace(trace: Sequence[TraceRow], path) -> None:
  with open(path, 'w', newline='') as csv_file:
    writer = csv.writer(csv_file, lineterminator='\n')
    writer.writerow(TRACE_HEADER)
    for row in trace:
      writer.writerow([row.step, repr(row.loss), repr(row.l_tran), repr(row.l_rot), repr(row.s_tran), repr(row.s_rot), repr(row.heldout)])
