'''Measurement and GPS simulation

Measurements are produced in the vehicle frame. The impairments are
applied in a fixed order:

  visibility -> missed detections -> clutter -> coordinate noise

Clutter is appended after the noise has been applied to the surviving
true detections, so clutter points are never perturbed.
'''

import logging
import math
from dataclasses import dataclass

import numpy as np

from deeploc import geometry
from deeploc.auxiliaries import exception
from deeploc.geometry import Pose
from deeploc.world import LandmarkMap

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class SensorConfig:
  fov_radius: float = 50.0
  lambda_clutter: float = 0.0
  lambda_miss: float = 0.0
  sigma_syn: float = 0.0
  gps_sigma_xy: float = 2.0
  gps_sigma_phi: float = math.radians(10.0)

  def __post_init__(self):
    for name in ('fov_radius', 'lambda_clutter', 'lambda_miss', 'sigma_syn', 'gps_sigma_xy', 'gps_sigma_phi'):
      value = getattr(self, name)
      if not (math.isfinite(value) and value >= 0.0):
        raise exception.InputError(name, f'{value} must be finite and non-negative')
    if self.fov_radius == 0.0:
      raise exception.InputError('fov_radius', 'must be positive')

@dataclass(frozen=True, eq=False)
class MeasurementSet:
  '''Vehicle-frame points observed at time t, in no particular order'''
  points: np.ndarray
  t: float = 0.0

  def __post_init__(self):
    points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(points)):
      raise exception.InputError('points', 'measurements must be finite')
    object.__setattr__(self, 'points', points)

  def __len__(self):
    return self.points.shape[0]

@dataclass(frozen=True)
class GpsReading:
  pose: Pose
  t: float = 0.0

#--------------------------------------------------------------------#

def sample_poisson(lam: float, rng: np.random.Generator) -> int:
  '''Poisson(lam) draw'''
  if not (math.isfinite(lam) and lam >= 0.0):
    raise exception.InputError(lam, 'Poisson rate must be finite and non-negative')
  if lam == 0.0:
    return 0
  return int(rng.poisson(lam))

def poisson_pmf(k: int, lam: float) -> float:
  return math.exp(k*math.log(lam) - lam - math.lgamma(k + 1)) if lam > 0.0 else float(k == 0)

def visible_landmarks(landmark_map: LandmarkMap, true_pose: Pose, fov_radius: float) -> np.ndarray:
  '''Landmarks within the field of view, in the vehicle frame, ascending id order'''
  if not fov_radius > 0.0:
    raise exception.InputError(fov_radius, 'field of view radius must be positive')
  world = landmark_map.query_points(true_pose.position, fov_radius)
  return geometry.world_to_vehicle(true_pose, world)

def apply_miss(points: np.ndarray, lambda_miss: float, rng: np.random.Generator) -> np.ndarray:
  '''Removes k ~ Poisson(lambda_miss) points uniformly at random'''
  points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  k = sample_poisson(lambda_miss, rng)
  n = points.shape[0]
  if k == 0:
    return points.copy()
  if k >= n:
    return np.empty((0, 2))
  keep = np.ones(n, dtype=bool)
  keep[rng.choice(n, size=k, replace=False)] = False
  return points[keep]

def clutter_points(lambda_clutter: float, fov_radius: float, rng: np.random.Generator) -> np.ndarray:
  '''k ~ Poisson(lambda_clutter) points uniform on the field-of-view disk'''
  if not fov_radius > 0.0:
    raise exception.InputError(fov_radius, 'field of view radius must be positive')
  k = sample_poisson(lambda_clutter, rng)
  if k == 0:
    return np.empty((0, 2))
  radius = fov_radius*np.sqrt(rng.random(k))
  angle = 2.0*np.pi*rng.random(k)
  clutter = np.stack([radius*np.cos(angle), radius*np.sin(angle)], axis=1)
  # cos/sin rounding must not push a point past the disk
  norm = np.hypot(clutter[:, 0], clutter[:, 1])
  over = norm > fov_radius
  clutter[over] *= (fov_radius/norm[over])[:, None]
  return clutter

def apply_clutter(points: np.ndarray, lambda_clutter: float, fov_radius: float, rng: np.random.Generator) -> np.ndarray:
  points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  return np.concatenate([points, clutter_points(lambda_clutter, fov_radius, rng)])

def apply_noise(points: np.ndarray, sigma_syn: float, rng: np.random.Generator) -> np.ndarray:
  '''Perturbs every coordinate by Uniform(-sigma_syn, sigma_syn)'''
  if sigma_syn < 0.0:
    raise exception.InputError(sigma_syn, 'noise bound must be non-negative')
  points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  if sigma_syn == 0.0 or points.shape[0] == 0:
    return points.copy()
  return points + rng.uniform(-sigma_syn, sigma_syn, size=points.shape)

def impair(points: np.ndarray, lambda_miss: float, lambda_clutter: float, sigma_syn: float, fov_radius: float, rng: np.random.Generator) -> np.ndarray:
  '''miss -> noise on the detections -> appended clutter

  Each impairment draws from its own child stream, so changing one rate
  leaves the draws of the others untouched.
  '''
  miss_rng, clutter_rng, noise_rng = rng.spawn(3)
  detected = apply_miss(points, lambda_miss, miss_rng)
  clutter = clutter_points(lambda_clutter, fov_radius, clutter_rng)
  return np.concatenate([apply_noise(detected, sigma_syn, noise_rng), clutter])

def simulate_measurements(landmark_map: LandmarkMap, true_pose: Pose, config: SensorConfig, rng: np.random.Generator, t: float = 0.0) -> MeasurementSet:
  visible = visible_landmarks(landmark_map, true_pose, config.fov_radius)
  points = impair(visible, config.lambda_miss, config.lambda_clutter, config.sigma_syn, config.fov_radius, rng)
  return MeasurementSet(points, t)

def simulate_gps(true_pose: Pose, gps_sigma_xy: float, gps_sigma_phi: float, rng: np.random.Generator, t: float = 0.0) -> GpsReading:
  '''Gaussian-perturbed truth'''
  if gps_sigma_xy < 0.0 or gps_sigma_phi < 0.0:
    raise exception.InputError((gps_sigma_xy, gps_sigma_phi), 'GPS sigmas must be non-negative')
  noise = rng.normal(0.0, 1.0, 3)*np.array([gps_sigma_xy, gps_sigma_xy, gps_sigma_phi])
  return GpsReading(Pose(true_pose.x + noise[0], true_pose.y + noise[1], geometry.wrap_angle(true_pose.phi + noise[2])), t)
