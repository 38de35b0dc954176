'''Landmark maps and ground-truth trajectories

A LandmarkMap is immutable after construction; radius queries go through
a uniform grid and return exactly what a brute-force scan returns.
Synthetic worlds are generated from a seed: first a CTRV trajectory,
then landmarks scattered along it.
'''

import csv
import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from deeploc.auxiliaries import exception, kalman
from deeploc.geometry import Point2, Pose

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

MAP_HEADER = ['id', 'x', 'y', 'source']
TRAJECTORY_HEADER = ['t', 'x', 'y', 'phi', 'v', 'omega']

#--------------------------------------------------------------------#

class Source(enum.Enum):
  LASER = 'laser'
  RADAR = 'radar'
  CAMERA = 'camera'

# share of each sensor in a 3860-landmark reference map
SOURCE_PROBABILITIES = {Source.LASER: 1731/3860,
                        Source.RADAR: 718/3860,
                        Source.CAMERA: 1411/3860}

@dataclass(frozen=True)
class Landmark:
  id: int
  position: Point2
  source: Source = Source.LASER

  def __post_init__(self):
    if int(self.id) != self.id or self.id < 0:
      raise exception.InputError(self.id, 'landmark id must be a non-negative integer')
    object.__setattr__(self, 'id', int(self.id))

#--------------------------------------------------------------------#

class GridIndex:
  '''Uniform grid over a fixed set of 2D positions'''
  def __init__(self, positions: np.ndarray, cell_size: float):
    if cell_size <= 0.0:
      raise exception.InputError(cell_size, 'cell size must be positive')
    self._cell_size = float(cell_size)
    self._positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    self._cells = {}
    keys = np.floor(self._positions/self._cell_size).astype(np.int64)
    for index, (i, j) in enumerate(keys):
      self._cells.setdefault((int(i), int(j)), []).append(index)
    self._cells = {key: np.array(value, dtype=np.int64) for key, value in self._cells.items()}

  @property
  def cell_size(self):
    return self._cell_size

  def query(self, cx: float, cy: float, r: float) -> np.ndarray:
    '''Sorted indices of all positions within distance r of (cx, cy)'''
    c = self._cell_size
    i0, i1 = math.floor((cx - r)/c), math.floor((cx + r)/c)
    j0, j1 = math.floor((cy - r)/c), math.floor((cy + r)/c)
    hits = [self._cells[(i, j)]
            for i in range(i0, i1 + 1)
            for j in range(j0, j1 + 1)
            if (i, j) in self._cells]
    if not hits:
      return np.empty(0, dtype=np.int64)
    candidates = np.concatenate(hits)
    xy = self._positions[candidates]
    dx = xy[:, 0] - cx
    dy = xy[:, 1] - cy
    return np.sort(candidates[dx*dx + dy*dy <= r*r])

class LandmarkMap:
  '''The off-line landmark map'''
  def __init__(self, landmarks: Iterable[Landmark] = (), cell_size: float = 25.0):
    landmarks = sorted(landmarks, key=lambda lm: lm.id)
    ids = [lm.id for lm in landmarks]
    if len(set(ids)) != len(ids):
      raise exception.InputError('id', 'landmark ids are not unique')
    self._landmarks = tuple(landmarks)
    self._ids = np.array(ids, dtype=np.int64)
    self._xy = np.array([[lm.position.x, lm.position.y] for lm in landmarks], dtype=np.float64).reshape(-1, 2)
    self._xy.flags.writeable = False
    self._index = GridIndex(self._xy, cell_size)

  def __len__(self):
    return len(self._landmarks)

  def __iter__(self):
    return iter(self._landmarks)

  def __eq__(self, other):
    if not isinstance(other, LandmarkMap):
      return NotImplemented
    return self._landmarks == other._landmarks

  @property
  def landmarks(self) -> Tuple[Landmark, ...]:
    return self._landmarks

  @property
  def positions(self) -> np.ndarray:
    '''(n, 2) world-frame positions in ascending id order'''
    return self._xy

  @property
  def cell_size(self):
    return self._index.cell_size

  def query_indices(self, center: Point2, r: float) -> np.ndarray:
    if not r > 0.0:
      raise exception.InputError(r, 'query radius must be positive')
    return self._index.query(center.x, center.y, r)

  def query_points(self, center: Point2, r: float) -> np.ndarray:
    '''(k, 2) world-frame positions within r of center, ascending id order'''
    return self._xy[self.query_indices(center, r)]

  def query_radius(self, center: Point2, r: float) -> List[Landmark]:
    return [self._landmarks[i] for i in self.query_indices(center, r)]

  def source_counts(self) -> dict:
    counts = {source.value: 0 for source in Source}
    for lm in self._landmarks:
      counts[lm.source.value] += 1
    return counts

def query_radius(landmark_map: LandmarkMap, center: Point2, r: float) -> List[Landmark]:
  '''Landmarks within distance r of center (inclusive), ascending id order'''
  return landmark_map.query_radius(center, r)

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class TrajectoryPoint:
  '''Ground truth at time t; v and omega hold until the next point'''
  t: float
  pose: Pose
  v: float
  omega: float

@dataclass(frozen=True)
class Trajectory:
  points: Tuple[TrajectoryPoint, ...]
  dt: float

  def __post_init__(self):
    points = tuple(self.points)
    object.__setattr__(self, 'points', points)
    if len(points) < 2:
      raise exception.InputError('trajectory', 'at least two points are required')
    if not self.dt > 0.0:
      raise exception.InputError(self.dt, 'dt must be positive')
    times = np.array([p.t for p in points])
    steps = np.diff(times)
    if np.any(steps <= 0.0):
      raise exception.InputError('trajectory', 't is not strictly increasing')
    if not np.allclose(steps, self.dt, rtol=1e-9, atol=1e-9):
      raise exception.InputError('trajectory', 'time steps are not uniform')
    if any(p.v < 0.0 for p in points):
      raise exception.InputError('trajectory', 'negative speed')

  def __len__(self):
    return len(self.points)

  @property
  def poses(self) -> List[Pose]:
    return [p.pose for p in self.points]

  @property
  def times(self) -> np.ndarray:
    return np.array([p.t for p in self.points])

  @property
  def positions(self) -> np.ndarray:
    return np.array([[p.pose.x, p.pose.y] for p in self.points])

  def arc_lengths(self) -> np.ndarray:
    '''Cumulative driven distance at every point'''
    lengths = np.array([p.v*self.dt for p in self.points[:-1]])
    return np.concatenate([[0.0], np.cumsum(lengths)])

  @property
  def length(self) -> float:
    return float(self.arc_lengths()[-1])

#--------------------------------------------------------------------#

def _check_range(name, value_range, lower=None):
  lo, hi = (float(v) for v in value_range)
  if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
    raise exception.InputError(name, f'invalid range {value_range}')
  if lower is not None and lo < lower:
    raise exception.InputError(name, f'range {value_range} starts below {lower}')
  return lo, hi

def generate_trajectory(seed: int, duration: float, dt: float, speed_range: Sequence[float], turn_rate_range: Sequence[float], segment_duration: float = 5.0, start: Pose = Pose(0.0, 0.0, 0.0)) -> Trajectory:
  '''Piecewise-constant (v, omega) CTRV trajectory'''
  if not dt > 0.0:
    raise exception.InputError(dt, 'dt must be positive')
  if not duration >= 2*dt:
    raise exception.InputError(duration, 'duration must cover at least two steps')
  if not segment_duration > 0.0:
    raise exception.InputError(segment_duration, 'segment duration must be positive')
  v_lo, v_hi = _check_range('speed_range', speed_range, lower=0.0)
  w_lo, w_hi = _check_range('turn_rate_range', turn_rate_range)

  rng = np.random.default_rng(seed)
  n_steps = int(round(duration/dt))
  segment_steps = max(1, int(round(segment_duration/dt)))

  state = np.array([start.x, start.y, start.phi, 0.0, 0.0])
  points = []
  for i in range(n_steps + 1):
    if i % segment_steps == 0:
      state[3] = rng.uniform(v_lo, v_hi)
      state[4] = rng.uniform(w_lo, w_hi)
    points.append(TrajectoryPoint(i*dt, Pose(state[0], state[1], state[2]), float(state[3]), float(state[4])))
    state = kalman.ctrv_transition(state, dt)
  return Trajectory(tuple(points), dt)

def generate_map(seed: int, route: Trajectory, density: float, lateral_spread: float = 30.0, cell_size: float = 25.0) -> LandmarkMap:
  '''Landmarks scattered along a route

  density is landmarks per km of route; positions are uniform along the
  arc length with a Gaussian lateral offset truncated at lateral_spread.
  '''
  if not density > 0.0:
    raise exception.InputError(density, 'density must be positive')
  if lateral_spread < 0.0:
    raise exception.InputError(lateral_spread, 'lateral spread must be non-negative')
  length = route.length
  if not length > 0.0:
    raise exception.InputError('route', 'route has zero length')

  rng = np.random.default_rng(seed)
  n = int(rng.poisson(density*length/1000.0))

  # position along the polyline through the trajectory points
  arc = route.arc_lengths()
  xy = route.positions
  s = rng.uniform(0.0, length, n)
  segment = np.clip(np.searchsorted(arc, s, side='right') - 1, 0, len(arc) - 2)
  seg_len = arc[segment + 1] - arc[segment]
  frac = np.divide(s - arc[segment], seg_len, out=np.zeros(n), where=seg_len > 0.0)
  chord = xy[segment + 1] - xy[segment]
  base = xy[segment] + frac[:, None]*chord
  heading = np.arctan2(chord[:, 1], chord[:, 0])

  sigma = 0.5*lateral_spread
  lateral = rng.normal(0.0, sigma, n)
  outside = np.abs(lateral) > lateral_spread
  while np.any(outside):
    lateral[outside] = rng.normal(0.0, sigma, int(outside.sum()))
    outside = np.abs(lateral) > lateral_spread
  normal = np.stack([-np.sin(heading), np.cos(heading)], axis=1)
  positions = base + lateral[:, None]*normal

  sources = list(SOURCE_PROBABILITIES)
  picks = rng.choice(len(sources), size=n, p=list(SOURCE_PROBABILITIES.values()))

  landmarks = [Landmark(i, Point2(x, y), sources[k]) for i, ((x, y), k) in enumerate(zip(positions, picks))]
  _logger.debug('generated %d landmarks along %.1f m', n, length)
  return LandmarkMap(landmarks, cell_size)

#--------------------------------------------------------------------#

def read_rows(path, header):
  '''(line number, row) pairs of a CSV file after checking its header'''
  with open(path, newline='') as csv_file:
    reader = csv.reader(csv_file)
    try:
      first = next(reader)
    except StopIteration:
      raise exception.FormatError(path, 1, 'missing header')
    if first != header:
      raise exception.FormatError(path, 1, f'expected header {",".join(header)}')
    for row in reader:
      if not row:
        continue
      yield reader.line_num, row

def save_map(landmark_map: LandmarkMap, path) -> None:
  with open(path, 'w', newline='') as csv_file:
    writer = csv.writer(csv_file, lineterminator='\n')
    writer.writerow(MAP_HEADER)
    for lm in landmark_map:
      writer.writerow([lm.id, repr(lm.position.x), repr(lm.position.y), lm.source.value])

def load_map(path, cell_size: float = 25.0) -> LandmarkMap:
  landmarks = []
  seen = set()
  for line, row in read_rows(path, MAP_HEADER):
    if len(row) != 4:
      raise exception.FormatError(path, line, f'expected 4 fields, got {len(row)}')
    try:
      landmark = Landmark(int(row[0]), Point2(float(row[1]), float(row[2])), Source(row[3]))
    except (ValueError, exception.Error) as error:
      raise exception.FormatError(path, line, str(error))
    if landmark.id in seen:
      raise exception.FormatError(path, line, f'duplicate id {landmark.id}')
    seen.add(landmark.id)
    landmarks.append(landmark)
  return LandmarkMap(landmarks, cell_size)

def save_trajectory(trajectory: Trajectory, path) -> None:
  with open(path, 'w', newline='') as csv_file:
    writer = csv.writer(csv_file, lineterminator='\n')
    writer.writerow(TRAJECTORY_HEADER)
    for p in trajectory.points:
      writer.writerow([repr(p.t), repr(p.pose.x), repr(p.pose.y), repr(p.pose.phi), repr(p.v), repr(p.omega)])

def load_trajectory(path) -> Trajectory:
  points = []
  for line, row in read_rows(path, TRAJECTORY_HEADER):
    if len(row) != 6:
      raise exception.FormatError(path, line, f'expected 6 fields, got {len(row)}')
    try:
      t, x, y, phi, v, omega = (float(value) for value in row)
      points.append(TrajectoryPoint(t, Pose(x, y, phi), v, omega))
    except (ValueError, exception.Error) as error:
      raise exception.FormatError(path, line, str(error))
  if len(points) < 2:
    raise exception.FormatError(path, None, 'a trajectory needs at least two points')
  try:
    return Trajectory(tuple(points), points[1].t - points[0].t)
  except exception.InputError as error:
    raise exception.FormatError(path, None, str(error))
