'''Extended Kalman filter with a CTRV motion model

The state is (x, y, phi, v, omega): planar position, heading, speed and
turn rate. The observation is a pose (x, y, phi) or a position (x, y).

Example:
  ekf = CtrvKalmanFilter(x0=np.array([0, 0, 0, 10, 0]), P=np.eye(5), Q=q)
  ekf.predict(0.1)
  ekf.update(np.array([1.0, 0.0, 0.0]), r_pose)
  state = ekf.get_state()
'''

import logging
import math
from dataclasses import dataclass

import numpy as np

from deeploc.auxiliaries import exception
from deeploc.geometry import wrap_angle

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

# below this turn rate the straight-line limit is used
OMEGA_EPS = 1e-6

POSE_H = np.eye(3, 5)
POSITION_H = np.eye(2, 5)

#--------------------------------------------------------------------#

def ctrv_transition(mean: np.ndarray, dt: float) -> np.ndarray:
  '''Propagates a CTRV state by dt seconds'''
  x, y, phi, v, omega = (float(c) for c in mean)
  if abs(omega) > OMEGA_EPS:
    phi_new = phi + omega*dt
    x += v/omega*(math.sin(phi_new) - math.sin(phi))
    y += v/omega*(math.cos(phi) - math.cos(phi_new))
  else:
    x += v*dt*math.cos(phi)
    y += v*dt*math.sin(phi)
  return np.array([x, y, wrap_angle(phi + omega*dt), v, omega])

def ctrv_jacobian(mean: np.ndarray, dt: float) -> np.ndarray:
  '''Jacobian of ctrv_transition with respect to the state'''
  _, _, phi, v, omega = (float(c) for c in mean)
  jac = np.eye(5)
  if abs(omega) > OMEGA_EPS:
    phi_new = phi + omega*dt
    s0, c0 = math.sin(phi), math.cos(phi)
    s1, c1 = math.sin(phi_new), math.cos(phi_new)
    jac[0, 2] = v/omega*(c1 - c0)
    jac[0, 3] = (s1 - s0)/omega
    jac[0, 4] = v*dt*c1/omega - v*(s1 - s0)/omega**2
    jac[1, 2] = v/omega*(s1 - s0)
    jac[1, 3] = (c0 - c1)/omega
    jac[1, 4] = v*dt*s1/omega - v*(c0 - c1)/omega**2
  else:
    s0, c0 = math.sin(phi), math.cos(phi)
    jac[0, 2] = -v*dt*s0
    jac[0, 3] = dt*c0
    jac[0, 4] = -0.5*v*dt*dt*s0
    jac[1, 2] = v*dt*c0
    jac[1, 3] = dt*s0
    jac[1, 4] = 0.5*v*dt*dt*c0
  jac[2, 4] = dt
  return jac

#--------------------------------------------------------------------#

@dataclass(frozen=True, eq=False)
class EkfState:
  '''CTRV mean and covariance'''
  mean: np.ndarray
  cov: np.ndarray

  def __post_init__(self):
    mean = np.array(self.mean, dtype=np.float64).reshape(5)
    cov = np.array(self.cov, dtype=np.float64).reshape(5, 5)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
      raise exception.NumericError('EKF state is not finite')
    mean[2] = wrap_angle(mean[2])
    object.__setattr__(self, 'mean', mean)
    object.__setattr__(self, 'cov', cov)

  @property
  def pose(self):
    '''(x, y, phi)'''
    return self.mean[:3].copy()

def ekf_predict(state: EkfState, dt: float, Q: np.ndarray) -> EkfState:
  '''Time update; Q is the process noise density per second'''
  if dt <= 0.0:
    raise exception.InputError(dt, 'dt must be positive')
  F = ctrv_jacobian(state.mean, dt)
  P = F @ state.cov @ F.T + np.asarray(Q)*dt
  return EkfState(ctrv_transition(state.mean, dt), 0.5*(P + P.T))

def ekf_update(state: EkfState, z: np.ndarray, R: np.ndarray, H: np.ndarray = POSE_H) -> EkfState:
  '''Measurement update with a linear observation of the state

  H selects (x, y, phi) or (x, y); the heading innovation is wrapped. The
  covariance is updated in Joseph form.
  '''
  z = np.asarray(z, dtype=np.float64).reshape(-1)
  if not np.all(np.isfinite(z)):
    raise exception.NumericError('observation is not finite')
  R = np.asarray(R, dtype=np.float64)
  if H.shape[0] != z.shape[0] or R.shape != (z.shape[0], z.shape[0]):
    raise exception.InputError('R', f'shape {R.shape} does not match the observation {z.shape}')

  y = z - H @ state.mean
  if H.shape[0] > 2:
    y[2] = wrap_angle(y[2])
  S = H @ state.cov @ H.T + R
  try:
    S_inv = np.linalg.inv(S)
  except np.linalg.LinAlgError:
    raise exception.NumericError('innovation covariance is not invertible')
  if not np.all(np.isfinite(S_inv)):
    raise exception.NumericError('innovation covariance is not invertible')

  K = state.cov @ H.T @ S_inv
  I = np.eye(5)
  A = I - K @ H
  P = A @ state.cov @ A.T + K @ R @ K.T
  return EkfState(state.mean + K @ y, 0.5*(P + P.T))

#--------------------------------------------------------------------#

class CtrvKalmanFilter:
  '''Stateful wrapper around ekf_predict / ekf_update'''
  def __init__(self, x0=None, P=None, Q=None):
    self.Q = np.eye(5) if Q is None else np.asarray(Q, dtype=np.float64)
    P = np.eye(5) if P is None else P
    x0 = np.zeros(5) if x0 is None else x0
    self._state = EkfState(x0, P)

  @property
  def state(self) -> EkfState:
    return self._state

  def predict(self, dt):
    self._state = ekf_predict(self._state, dt, self.Q)

  def update(self, z, R, H=POSE_H):
    self._state = ekf_update(self._state, z, R, H)

  def get_state(self):
    return self._state.mean.copy()
