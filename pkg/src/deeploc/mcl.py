'''Simplified Monte Carlo localization baseline

A plain particle filter over (x, y, phi) that serves as the speed and
accuracy reference for the network path. Each measurement is scored by
its squared distance to the nearest map landmark as seen from the
particle:

  log w_i += -sum_z min_m |z - m_i|^2 / (2 sigma_l^2)

This is deliberately not a random-finite-set filter.
'''

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from deeploc import geometry
from deeploc.auxiliaries import exception
from deeploc.geometry import Pose, PoseOffset
from deeploc.sensors import MeasurementSet
from deeploc.world import LandmarkMap

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

# below exp(-700) the weights are treated as zero
LOG_WEIGHT_FLOOR = -700.0
CHUNK = 128

#--------------------------------------------------------------------#

@dataclass(frozen=True, eq=False)
class ParticleSet:
  '''n poses as an (n, 3) array and normalized weights'''
  poses: np.ndarray
  weights: np.ndarray

  def __post_init__(self):
    poses = np.array(self.poses, dtype=np.float64).reshape(-1, 3)
    weights = np.array(self.weights, dtype=np.float64).reshape(-1)
    if poses.shape[0] < 1 or weights.shape[0] != poses.shape[0]:
      raise exception.InputError('particles', f'{poses.shape[0]} poses with {weights.shape[0]} weights')
    if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-12:
      raise exception.InputError('weights', 'weights must be non-negative and sum to 1')
    poses[:, 2] = geometry.wrap_angles(poses[:, 2])
    object.__setattr__(self, 'poses', poses)
    object.__setattr__(self, 'weights', weights)

  def __len__(self):
    return self.poses.shape[0]

  @classmethod
  def around(cls, pose: Pose, n: int, std: PoseOffset, rng: np.random.Generator) -> 'ParticleSet':
    '''n particles normally distributed around pose'''
    poses = pose.as_array() + rng.normal(size=(n, 3))*std.as_array()
    return cls(poses, np.full(n, 1.0/n))

  @property
  def effective_size(self) -> float:
    return 1.0/float(np.sum(self.weights**2))

  def estimate(self) -> Pose:
    '''Weighted mean; circular mean for the heading'''
    w = self.weights
    x, y = w @ self.poses[:, 0], w @ self.poses[:, 1]
    phi = math.atan2(w @ np.sin(self.poses[:, 2]), w @ np.cos(self.poses[:, 2]))
    return Pose(x, y, phi)

@dataclass(frozen=True)
class MotionNoise:
  sigma_xy: float = 0.1
  sigma_phi: float = math.radians(0.5)

@dataclass(frozen=True, eq=False)
class MclStep:
  particles: ParticleSet
  estimate: Pose
  diverged: bool = False
  resampled: bool = False

#--------------------------------------------------------------------#

# filterpy's resampler draws from the global numpy RNG; this one takes the keyed stream
def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
  '''Indices drawn with one uniform offset over n even subdivisions'''
  n = len(weights)
  positions = (rng.random() + np.arange(n))/n
  cumulative = np.cumsum(weights)
  cumulative[-1] = 1.0
  return np.searchsorted(cumulative, positions, side='right')

def log_likelihood(poses: np.ndarray, meas: np.ndarray, landmarks: np.ndarray, sigma_l: float = 1.0) -> np.ndarray:
  '''Per particle; landmarks in the world frame, measurements in the vehicle frame'''
  out = np.empty(poses.shape[0])
  for start in range(0, poses.shape[0], CHUNK):
    block = poses[start:start + CHUNK]
    c, s = np.cos(block[:, 2]), np.sin(block[:, 2])
    # measurements in the world frame per particle, (p, k, 2)
    wx = c[:, None]*meas[None, :, 0] - s[:, None]*meas[None, :, 1] + block[:, 0:1]
    wy = s[:, None]*meas[None, :, 0] + c[:, None]*meas[None, :, 1] + block[:, 1:2]
    d2 = (wx[:, :, None] - landmarks[None, None, :, 0])**2 + (wy[:, :, None] - landmarks[None, None, :, 1])**2
    out[start:start + CHUNK] = -d2.min(axis=2).sum(axis=1)/(2.0*sigma_l**2)
  return out

def mcl_baseline_step(particles: ParticleSet, meas, landmark_map: LandmarkMap, motion_noise: MotionNoise, rng: np.random.Generator,
                      control: Optional[PoseOffset] = None, sigma_l: float = 1.0, load_radius: float = 100.0) -> MclStep:
  '''Diffuse, weight, resample when the effective size drops below n/2'''
  n = len(particles)
  poses = particles.poses.copy()
  if control is not None:
    # control is a vehicle-frame displacement
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    poses[:, 0] += c*control.dx - s*control.dy
    poses[:, 1] += s*control.dx + c*control.dy
    poses[:, 2] += control.dphi
  noise = rng.normal(size=(n, 3))*np.array([motion_noise.sigma_xy, motion_noise.sigma_xy, motion_noise.sigma_phi])
  poses += noise
  poses[:, 2] = geometry.wrap_angles(poses[:, 2])

  points = meas.points if isinstance(meas, MeasurementSet) else np.asarray(meas, dtype=np.float64).reshape(-1, 2)
  center = particles.estimate()
  landmarks = landmark_map.query_points(center.position, load_radius)

  diverged = False
  if points.shape[0] == 0:
    weights = particles.weights
  elif landmarks.shape[0] == 0:
    _logger.warning('no map landmarks around %s, particle weights reset', center)
    weights, diverged = np.full(n, 1.0/n), True
  else:
    with np.errstate(divide='ignore'):
      log_w = np.log(particles.weights) + log_likelihood(poses, points, landmarks, sigma_l)
    peak = np.max(log_w)
    if peak < LOG_WEIGHT_FLOOR:
      _logger.warning('all particle weights vanished, weights reset')
      weights, diverged = np.full(n, 1.0/n), True
    else:
      weights = np.exp(log_w - peak)
      weights /= weights.sum()

  updated = ParticleSet(poses, weights)
  estimate = updated.estimate()
  resampled = False
  if updated.effective_size < n/2.0:
    indices = systematic_resample(updated.weights, rng)
    updated = ParticleSet(poses[indices], np.full(n, 1.0/n))
    resampled = True
  return MclStep(updated, estimate, diverged, resampled)
