'''Planar poses, offsets and rigid transforms

The world frame is a planar Cartesian frame standing in for UTM, the
vehicle frame has its origin at the vehicle with x pointing forward.
Angles are radians and normalized to (-pi, pi].

Example:
  pose = Pose(1.0, 2.0, math.pi/2)
  to_world = pose_to_transform(pose)
  apply(to_world, Point2(1.0, 0.0))          # -> Point2(1.0, 3.0)
  apply(invert(to_world), Point2(1.0, 3.0))  # -> Point2(1.0, 0.0)
'''

import math
from dataclasses import dataclass

import numpy as np

from deeploc.auxiliaries import exception

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

TWO_PI = 2.0*math.pi

def wrap_angle(a: float) -> float:
  '''Maps an angle to (-pi, pi]'''
  a = float(a)
  if not math.isfinite(a):
    raise exception.InputError(a, 'angle is not finite')
  if -math.pi < a <= math.pi:
    return a
  r = math.pi - math.fmod(math.pi - a, TWO_PI)
  if r <= -math.pi:
    r += TWO_PI
  elif r > math.pi:
    r -= TWO_PI
  return r

def wrap_angles(a: np.ndarray) -> np.ndarray:
  '''Vectorized wrap_angle'''
  a = np.asarray(a, dtype=np.float64)
  if not np.all(np.isfinite(a)):
    raise exception.InputError('angles', 'not finite')
  r = np.pi - np.mod(np.pi - a, TWO_PI)
  r = np.where(r <= -np.pi, r + TWO_PI, r)
  inside = (a > -np.pi) & (a <= np.pi)
  return np.where(inside, a, r)

def _check_finite(name, *values):
  for value in values:
    if not math.isfinite(value):
      raise exception.InputError(name, f'non-finite component {value}')

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class Point2:
  '''A 2D point, world or vehicle frame depending on context'''
  x: float
  y: float

  def __post_init__(self):
    object.__setattr__(self, 'x', float(self.x))
    object.__setattr__(self, 'y', float(self.y))
    _check_finite('Point2', self.x, self.y)

  def as_array(self) -> np.ndarray:
    return np.array([self.x, self.y])

@dataclass(frozen=True)
class Pose:
  '''Vehicle pose in the world frame'''
  x: float
  y: float
  phi: float

  def __post_init__(self):
    object.__setattr__(self, 'x', float(self.x))
    object.__setattr__(self, 'y', float(self.y))
    _check_finite('Pose', self.x, self.y, float(self.phi))
    object.__setattr__(self, 'phi', wrap_angle(self.phi))

  def as_array(self) -> np.ndarray:
    return np.array([self.x, self.y, self.phi])

  @property
  def position(self) -> Point2:
    return Point2(self.x, self.y)

@dataclass(frozen=True)
class PoseOffset:
  '''Translation and rotation between a prior pose and the true pose'''
  dx: float
  dy: float
  dphi: float

  def __post_init__(self):
    object.__setattr__(self, 'dx', float(self.dx))
    object.__setattr__(self, 'dy', float(self.dy))
    _check_finite('PoseOffset', self.dx, self.dy, float(self.dphi))
    object.__setattr__(self, 'dphi', wrap_angle(self.dphi))

  def as_array(self) -> np.ndarray:
    return np.array([self.dx, self.dy, self.dphi])

  def __neg__(self) -> 'PoseOffset':
    return PoseOffset(-self.dx, -self.dy, -self.dphi)

ZERO_OFFSET = PoseOffset(0.0, 0.0, 0.0)

@dataclass(frozen=True, eq=False)
class IsoTransform:
  '''Planar rigid transform q -> rotation @ q + translation'''
  rotation: np.ndarray
  translation: np.ndarray

  def __post_init__(self):
    rotation = np.array(self.rotation, dtype=np.float64).reshape(2, 2)
    translation = np.array(self.translation, dtype=np.float64).reshape(2)
    if abs(np.linalg.det(rotation) - 1.0) > 1e-9 or not np.allclose(rotation.T @ rotation, np.eye(2), atol=1e-9):
      raise exception.InputError('rotation', 'not a proper rotation')
    rotation.flags.writeable = False
    translation.flags.writeable = False
    object.__setattr__(self, 'rotation', rotation)
    object.__setattr__(self, 'translation', translation)

  @classmethod
  def identity(cls) -> 'IsoTransform':
    return cls(np.eye(2), np.zeros(2))

  def as_matrix(self) -> np.ndarray:
    '''3x3 homogeneous matrix'''
    h = np.eye(3)
    h[:2, :2] = self.rotation
    h[:2, 2] = self.translation
    return h

#--------------------------------------------------------------------#

def rotation_matrix(phi: float) -> np.ndarray:
  c, s = math.cos(phi), math.sin(phi)
  return np.array([[c, -s], [s, c]])

def pose_to_transform(p: Pose) -> IsoTransform:
  '''Vehicle frame -> world frame'''
  return IsoTransform(rotation_matrix(p.phi), np.array([p.x, p.y]))

def invert(t: IsoTransform) -> IsoTransform:
  rt = t.rotation.T
  return IsoTransform(rt, -rt @ t.translation)

def compose(a: IsoTransform, b: IsoTransform) -> IsoTransform:
  '''The transform applying b first, then a'''
  return IsoTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)

def apply(t: IsoTransform, q: Point2) -> Point2:
  x, y = t.rotation @ np.array([q.x, q.y]) + t.translation
  return Point2(x, y)

def apply_points(t: IsoTransform, points: np.ndarray) -> np.ndarray:
  '''Transforms the rows of an (n, 2) array'''
  points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  return points @ t.rotation.T + t.translation

def world_to_vehicle(pose: Pose, points: np.ndarray) -> np.ndarray:
  return apply_points(invert(pose_to_transform(pose)), points)

def vehicle_to_world(pose: Pose, points: np.ndarray) -> np.ndarray:
  return apply_points(pose_to_transform(pose), points)

#--------------------------------------------------------------------#

def compose_pose(p: Pose, d: PoseOffset) -> Pose:
  '''p + d, component-wise in the world frame'''
  return Pose(p.x + d.dx, p.y + d.dy, wrap_angle(p.phi + d.dphi))

def offset_between(a: Pose, b: Pose) -> PoseOffset:
  '''The offset d with compose_pose(a, d) == b'''
  return PoseOffset(b.x - a.x, b.y - a.y, wrap_angle(b.phi - a.phi))
