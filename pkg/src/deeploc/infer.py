'''Inference pipelines

gps_infer corrects a single GPS pose, step_network chains corrections
from the previous estimate and run_sequence drives a whole trajectory in
one of the modes

  gps_only      the GPS reading itself
  gps_net       GPS pose corrected by the network at every step
  net_only      network corrections chained from the previous estimate
  net_ekf       network pose fused by a CTRV extended Kalman filter
  net_ekf_gps   as net_ekf plus a position-only GPS update per step

A predictor is any callable (meas, map_pts, prior, truth) -> PoseOffset.
NetPredictor wraps trained parameters; ZeroPredictor and OraclePredictor
are the stub networks.
'''

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from deeploc import geometry, net, sensors
from deeploc.auxiliaries import exception, kalman
from deeploc.auxiliaries.kalman import EkfState
from deeploc.geometry import Pose, PoseOffset
from deeploc.net import DeepLocParams
from deeploc.sensors import GpsReading, MeasurementSet, SensorConfig
from deeploc.world import LandmarkMap, Trajectory

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

MODES = ('gps_only', 'gps_net', 'net_only', 'net_ekf', 'net_ekf_gps')
FLAGS = ('normal', 'dead_reckoned', 'diverged')
ESTIMATE_HEADER = ['t', 'x', 'y', 'phi', 'flag']

LOAD_RADIUS = 100.0

#--------------------------------------------------------------------#

def _check_psd(name, matrix, size):
  matrix = np.array(matrix, dtype=np.float64)
  if matrix.shape != (size, size) or not np.all(np.isfinite(matrix)):
    raise exception.InputError(name, f'expected a finite {size}x{size} matrix')
  if np.max(np.abs(matrix - matrix.T)) > 1e-9:
    raise exception.InputError(name, 'matrix is not symmetric')
  if np.min(np.linalg.eigvalsh(matrix)) < -1e-9:
    raise exception.InputError(name, 'matrix is not positive semi-definite')
  matrix.setflags(write=False)
  return matrix

def default_q() -> np.ndarray:
  '''Process noise density per second'''
  return np.diag([0.05**2, 0.05**2, math.radians(0.5)**2, 0.5**2, math.radians(2.0)**2])

@dataclass(frozen=True, eq=False)
class EkfConfig:
  '''Noise matrices of the fusion filter

  R_gps None derives the GPS noise from the sensor configuration. With
  gps_heading off the GPS enters as a position-only update.
  '''
  Q: np.ndarray = field(default_factory=default_q)
  R_net: np.ndarray = field(default_factory=lambda: np.diag([0.3**2, 0.3**2, math.radians(2.0)**2]))
  R_gps: Optional[np.ndarray] = None
  P0: np.ndarray = field(default_factory=lambda: np.diag([2.0**2, 2.0**2, math.radians(10.0)**2, 10.0**2, math.radians(30.0)**2]))
  gps_heading: bool = False

  def __post_init__(self):
    object.__setattr__(self, 'Q', _check_psd('Q', self.Q, 5))
    object.__setattr__(self, 'R_net', _check_psd('R_net', self.R_net, 3))
    object.__setattr__(self, 'P0', _check_psd('P0', self.P0, 5))
    if self.R_gps is not None:
      object.__setattr__(self, 'R_gps', _check_psd('R_gps', self.R_gps, 3))

  def gps_noise(self, sensor_config: SensorConfig) -> np.ndarray:
    if self.R_gps is not None:
      return self.R_gps
    return np.diag([sensor_config.gps_sigma_xy**2, sensor_config.gps_sigma_xy**2, sensor_config.gps_sigma_phi**2])

  @classmethod
  def from_rmse(cls, rmse_x: float, rmse_y: float, rmse_phi: float, **kwargs) -> 'EkfConfig':
    '''R_net from validation RMSE (meters, meters, radians)'''
    return cls(R_net=np.diag([rmse_x**2, rmse_y**2, rmse_phi**2]), **kwargs)

#--------------------------------------------------------------------#

class NetPredictor:
  '''Offset prediction by trained network parameters'''
  def __init__(self, params: DeepLocParams):
    self.params = params

  def __call__(self, meas, map_pts, prior=None, truth=None) -> PoseOffset:
    offset, _ = net.forward(self.params, meas, map_pts)
    return offset

  def batch(self, pairs) -> np.ndarray:
    return net.predict_batch(self.params, pairs)

class ZeroPredictor:
  '''Stub network that trusts the prior'''
  def __call__(self, meas, map_pts, prior=None, truth=None) -> PoseOffset:
    return geometry.ZERO_OFFSET

class OraclePredictor:
  '''Stub network that knows the true pose'''
  def __call__(self, meas, map_pts, prior=None, truth=None) -> PoseOffset:
    if prior is None or truth is None:
      raise exception.InputError('truth', 'the oracle needs the prior and the true pose')
    return geometry.offset_between(prior, truth)

def as_predictor(obj):
  if isinstance(obj, DeepLocParams):
    return NetPredictor(obj)
  if not callable(obj):
    raise exception.InputError(obj, 'not a predictor')
  return obj

#--------------------------------------------------------------------#

def local_map(landmark_map: LandmarkMap, pose: Pose, load_radius: float = LOAD_RADIUS) -> np.ndarray:
  '''Map landmarks within load_radius of pose, in the frame of pose'''
  world = landmark_map.query_points(pose.position, load_radius)
  if world.shape[0] == 0:
    raise exception.NoLandmarks(pose, f'no map landmarks within {load_radius} m')
  return geometry.world_to_vehicle(pose, world)

def _points(meas) -> np.ndarray:
  return meas.points if isinstance(meas, MeasurementSet) else np.asarray(meas, dtype=np.float64).reshape(-1, 2)

def correct_pose(predictor, prior: Pose, meas, landmark_map: LandmarkMap, truth: Optional[Pose] = None, load_radius: float = LOAD_RADIUS) -> Pose:
  '''prior + network offset; raises NoLandmarks on empty inputs'''
  points = _points(meas)
  if points.shape[0] == 0:
    raise exception.NoLandmarks(prior, 'no measurements')
  map_pts = local_map(landmark_map, prior, load_radius)
  offset = as_predictor(predictor)(points, map_pts, prior, truth)
  return geometry.compose_pose(prior, offset)

def gps_infer(predictor, gps: GpsReading, meas, landmark_map: LandmarkMap, truth: Optional[Pose] = None) -> Pose:
  return correct_pose(predictor, gps.pose, meas, landmark_map, truth)

def step_network(predictor, prev_pose: Pose, meas, landmark_map: LandmarkMap, truth: Optional[Pose] = None) -> Pose:
  return correct_pose(predictor, prev_pose, meas, landmark_map, truth)

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class StepRecord:
  t: float
  pose: Pose
  flag: str = 'normal'

@dataclass(eq=False)
class SequenceResult:
  mode: str
  records: List[StepRecord] = field(default_factory=list)
  truths: List[Pose] = field(default_factory=list)
  # wall-clock of the per-step pipeline, milliseconds
  step_ms: List[float] = field(default_factory=list)
  covariances: List[np.ndarray] = field(default_factory=list)

  @property
  def estimates(self) -> List[Pose]:
    return [r.pose for r in self.records]

  @property
  def dead_reckoned_fraction(self) -> float:
    if not self.records:
      return 0.0
    return sum(r.flag != 'normal' for r in self.records)/len(self.records)

  @property
  def mean_step_ms(self) -> float:
    return float(np.mean(self.step_ms)) if self.step_ms else float('nan')

def _pose_of(state: EkfState) -> Pose:
  x, y, phi = state.pose
  return Pose(x, y, phi)

def run_sequence(mode: str, predictor, landmark_map: LandmarkMap, trajectory: Trajectory, sensor_config: SensorConfig,
                 ekf_config: Optional[EkfConfig] = None, rng: Optional[np.random.Generator] = None) -> SequenceResult:
  '''Localizes along a trajectory; strictly sequential over time-steps

  Every step draws measurements and GPS from its own child generator.
  In the filter modes the posterior, propagated by the motion model,
  is the prior of the next network correction. A step without
  landmarks keeps the prior (filter: predict only) and is flagged
  dead_reckoned.
  '''
  if mode not in MODES:
    raise exception.InputError(mode, f'unknown mode, expected one of {", ".join(MODES)}')
  ekf_config = ekf_config if ekf_config is not None else EkfConfig()
  rng = rng if rng is not None else np.random.default_rng(0)
  predictor = as_predictor(predictor) if mode != 'gps_only' else None
  R_gps = ekf_config.gps_noise(sensor_config)
  gps_H = kalman.POSE_H if ekf_config.gps_heading else kalman.POSITION_H
  gps_R = R_gps if ekf_config.gps_heading else R_gps[:2, :2]

  result = SequenceResult(mode)
  ekf = None
  estimate = None
  for i, (point, step_rng) in enumerate(zip(trajectory.points, rng.spawn(len(trajectory)))):
    meas_rng, gps_rng = step_rng.spawn(2)
    truth = point.pose
    meas = sensors.simulate_measurements(landmark_map, truth, sensor_config, meas_rng, point.t)
    gps = sensors.simulate_gps(truth, sensor_config.gps_sigma_xy, sensor_config.gps_sigma_phi, gps_rng, point.t)
    flag = 'normal'

    start = time.perf_counter()
    if mode == 'gps_only':
      estimate = gps.pose
    elif mode in ('gps_net', 'net_only'):
      prior = gps.pose if mode == 'gps_net' or estimate is None else estimate
      try:
        estimate = correct_pose(predictor, prior, meas, landmark_map, truth)
      except exception.NoLandmarks as error:
        _logger.debug('t=%.2f: %s', point.t, error)
        estimate, flag = prior, 'dead_reckoned'
    else:
      if ekf is None:
        x0 = np.array([gps.pose.x, gps.pose.y, gps.pose.phi, 0.0, 0.0])
        ekf = kalman.CtrvKalmanFilter(x0, ekf_config.P0, ekf_config.Q)
      else:
        ekf.predict(trajectory.dt)
      prior = _pose_of(ekf.state)
      try:
        z = correct_pose(predictor, prior, meas, landmark_map, truth)
        ekf.update(z.as_array(), ekf_config.R_net)
      except exception.NoLandmarks as error:
        _logger.debug('t=%.2f: %s', point.t, error)
        flag = 'dead_reckoned'
      if mode == 'net_ekf_gps':
        ekf.update(gps.pose.as_array()[:gps_H.shape[0]], gps_R, gps_H)
      estimate = _pose_of(ekf.state)
      result.covariances.append(ekf.state.cov.copy())
    result.step_ms.append(1000.0*(time.perf_counter() - start))

    result.records.append(StepRecord(point.t, estimate, flag))
    result.truths.append(truth)
    if i and i % 500 == 0:
      _logger.info('%s: step %d of %d', mode, i, len(trajectory))

  if result.dead_reckoned_fraction > 0.0:
    _logger.warning('%s: %.1f%% of the steps were dead-reckoned', mode, 100.0*result.dead_reckoned_fraction)
  return result

def write_estimates(records: Sequence[StepRecord], path) -> None:
  with open(path, 'w', newline='') as csv_file:
    writer = csv.writer(csv_file, lineterminator='\n')
    writer.writerow(ESTIMATE_HEADER)
    for record in records:
      writer.writerow([repr(record.t), repr(record.pose.x), repr(record.pose.y), repr(record.pose.phi), record.flag])
