'''RMSE metrics, robustness sweeps, timing benchmarks and reports

The synthetic-offset task: at a random time-step the landmarks in the
field of view are the measurements, the prior is the truth displaced by
a sampled offset and the network has to recover the offset. The sweeps
rerun that task with one impairment (or all three) raised step by step.
Every sweep point uses the same trial streams, so the only difference
between two points is the impairment.
'''

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from deeploc import geometry, infer, mcl, net, sensors, train
from deeploc.auxiliaries import exception
from deeploc.geometry import Pose
from deeploc.net import DeepLocParams
from deeploc.train import OffsetRange
from deeploc.world import Landmark, LandmarkMap, Source, Trajectory

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

SWEEP_VARIABLES = ('clutter', 'miss', 'noise', 'combined')
DEFAULT_GRIDS = {'clutter': tuple(float(v) for v in range(0, 81, 10)),
                 'miss': tuple(float(v) for v in range(0, 31, 5)),
                 'noise': tuple(0.25*i for i in range(7)),
                 'combined': tuple(float(v) for v in range(0, 31, 2))}
AXIS_LABELS = {'clutter': 'clutter rate',
               'miss': 'missed detection rate',
               'noise': 'measurement noise bound [m]',
               'combined': 'iteration'}
# sigma_syn per combined-sweep iteration
COMBINED_NOISE_STEP = 0.027
REPORT_HEADER = ['value', 'rmse_x', 'rmse_y', 'rmse_phi']

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class RmseReport:
  '''Per-axis RMSE; meters and degrees'''
  rmse_x: float
  rmse_y: float
  rmse_phi: float
  n_samples: int
  time_ms: float = float('nan')
  se_x: float = 0.0
  se_y: float = 0.0
  se_phi: float = 0.0

  def __post_init__(self):
    if self.n_samples < 1:
      raise exception.InputError('n_samples', 'at least one sample is required')
    if min(self.rmse_x, self.rmse_y, self.rmse_phi) < 0.0:
      raise exception.InputError('rmse', 'RMSE values are non-negative')

  @property
  def rmse_xy(self) -> float:
    '''Positional RMSE'''
    return math.hypot(self.rmse_x, self.rmse_y)

def _rows(poses) -> np.ndarray:
  if isinstance(poses, np.ndarray):
    return poses.reshape(-1, 3).astype(np.float64)
  return np.array([p.as_array() for p in poses]).reshape(-1, 3)

def _rmse_se(squares: np.ndarray) -> Tuple[float, float]:
  value = math.sqrt(float(np.mean(squares)))
  if value == 0.0 or squares.shape[0] < 2:
    return value, 0.0
  # delta method: sd(e^2)/sqrt(n) propagated through the square root
  return value, float(np.std(squares, ddof=1))/math.sqrt(squares.shape[0])/(2.0*value)

def rmse(estimates: Sequence[Pose], truths: Sequence[Pose], time_ms: float = float('nan')) -> RmseReport:
  '''Heading residuals are wrapped before squaring'''
  est = _rows(estimates)
  ref = _rows(truths)
  if est.shape != ref.shape:
    raise exception.InputError('estimates', f'{est.shape[0]} estimates for {ref.shape[0]} truths')
  if est.shape[0] == 0:
    raise exception.InputError('estimates', 'at least one sample is required')
  residual = est - ref
  residual[:, 2] = geometry.wrap_angles(residual[:, 2])
  rx, sx = _rmse_se(residual[:, 0]**2)
  ry, sy = _rmse_se(residual[:, 1]**2)
  rphi, sphi = _rmse_se(residual[:, 2]**2)
  return RmseReport(rx, ry, math.degrees(rphi), est.shape[0], time_ms, sx, sy, math.degrees(sphi))

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class Impairment:
  lambda_miss: float = 0.0
  lambda_clutter: float = 0.0
  sigma_syn: float = 0.0

@dataclass(frozen=True)
class SweepSpec:
  variable: str
  # None selects the default grid of the variable
  grid: Optional[Tuple[float, ...]] = None
  trials: int = 500
  seed: int = 0

  def __post_init__(self):
    if self.variable not in SWEEP_VARIABLES:
      raise exception.InputError(self.variable, f'unknown sweep variable, expected one of {", ".join(SWEEP_VARIABLES)}')
    grid = DEFAULT_GRIDS[self.variable] if self.grid is None else tuple(float(v) for v in self.grid)
    if not grid:
      raise exception.InputError('grid', 'the sweep grid is empty')
    if any(not math.isfinite(v) or v < 0.0 for v in grid):
      raise exception.InputError('grid', 'grid values must be finite and non-negative')
    if self.trials < 1:
      raise exception.InputError('trials', 'at least one trial per point is required')
    object.__setattr__(self, 'grid', grid)

  def impairment(self, value: float) -> Impairment:
    if self.variable == 'clutter':
      return Impairment(lambda_clutter=value)
    if self.variable == 'miss':
      return Impairment(lambda_miss=value)
    if self.variable == 'noise':
      return Impairment(sigma_syn=value)
    return Impairment(value, value, COMBINED_NOISE_STEP*value)

@dataclass(eq=False)
class SweepTable:
  variable: str
  rows: List[Tuple[float, RmseReport]] = field(default_factory=list)

  def __len__(self):
    return len(self.rows)

#--------------------------------------------------------------------#

def _trial_sample(landmark_map, trajectory, offset_range, impairment, fov_radius, load_radius, rng, max_attempts=100):
  for _ in range(max_attempts):
    true_pose = trajectory.points[int(rng.integers(len(trajectory)))].pose
    visible = sensors.visible_landmarks(landmark_map, true_pose, fov_radius)
    meas = sensors.impair(visible, impairment.lambda_miss, impairment.lambda_clutter, impairment.sigma_syn, fov_radius, rng)
    try:
      return true_pose, train.make_train_sample(landmark_map, true_pose, meas, offset_range, rng, load_radius)
    except exception.SampleRejected:
      continue
  raise exception.NoLandmarks(None, f'no usable evaluation sample after {max_attempts} draws')

def synthetic_eval(predictor, landmark_map: LandmarkMap, trajectory: Trajectory, offset_range: OffsetRange, trials: int,
                   seed: int = 0, impairment: Impairment = Impairment(), fov_radius: float = 50.0,
                   load_radius: float = train.LOAD_RADIUS) -> RmseReport:
  '''RMSE of the recovered poses over `trials` displaced samples

  Trial k draws from default_rng([seed, k]) whatever the impairment.
  '''
  predictor = infer.as_predictor(predictor)
  truths, samples = [], []
  for k in range(trials):
    true_pose, sample = _trial_sample(landmark_map, trajectory, offset_range, impairment, fov_radius, load_radius, np.random.default_rng([seed, k]))
    truths.append(true_pose)
    samples.append(sample)
  priors = [train.shifted_pose(p, s.target) for p, s in zip(truths, samples)]

  start = time.perf_counter()
  if hasattr(predictor, 'batch'):
    offsets = predictor.batch([(s.meas, s.map_pts) for s in samples])
  else:
    offsets = np.array([predictor(s.meas, s.map_pts, prior, truth).as_array() for s, prior, truth in zip(samples, priors, truths)])
  elapsed = 1000.0*(time.perf_counter() - start)/trials
  estimates = [geometry.compose_pose(prior, geometry.PoseOffset(*o)) for prior, o in zip(priors, offsets)]
  return rmse(estimates, truths, elapsed)

def run_sweep(spec: SweepSpec, predictor, landmark_map: LandmarkMap, trajectory: Trajectory, offset_range: OffsetRange,
              fov_radius: float = 50.0, threads: int = 1) -> SweepTable:
  '''One synthetic evaluation per grid value; rows sorted by value'''
  if predictor is None:
    raise exception.CheckpointError('a trained checkpoint is required for a sweep')

  def point(value):
    report = synthetic_eval(predictor, landmark_map, trajectory, offset_range, spec.trials, spec.seed, spec.impairment(value), fov_radius)
    _logger.info('%s = %g: rmse %.3f m / %.3f m / %.2f deg', spec.variable, value, report.rmse_x, report.rmse_y, report.rmse_phi)
    return value, report

  if threads > 1:
    with ThreadPoolExecutor(max_workers=threads) as executor:
      rows = list(executor.map(point, spec.grid))
  else:
    rows = [point(value) for value in spec.grid]
  return SweepTable(spec.variable, sorted(rows, key=lambda row: row[0]))

def trend_slope(table: SweepTable) -> float:
  '''Least-squares slope of positional RMSE over the sweep values'''
  values = np.array([v for v, _ in table.rows])
  if values.shape[0] < 2:
    return 0.0
  return float(np.polyfit(values, [r.rmse_xy for _, r in table.rows], 1)[0])

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class BenchResult:
  n_meas: int
  n_map: int
  mean_ms: float
  p95_ms: float
  repetitions: int

def _timed(fn, repetitions: int, warmup: int) -> np.ndarray:
  for _ in range(warmup):
    fn()
  times = np.empty(repetitions)
  for i in range(repetitions):
    start = time.perf_counter()
    fn()
    times[i] = 1000.0*(time.perf_counter() - start)
  return times

def _bench_inputs(n_meas: int, n_map: int, rng):
  radius = 50.0*np.sqrt(rng.random(n_meas))
  angle = 2.0*np.pi*rng.random(n_meas)
  meas = np.stack([radius*np.cos(angle), radius*np.sin(angle)], axis=1)
  world = rng.uniform(-70.0, 70.0, size=(n_map, 2))
  return meas, world

def bench_inference(params: DeepLocParams, sizes: Sequence[Tuple[int, int]] = ((50, 50),), repetitions: int = 100, warmup: int = 10, seed: int = 0) -> List[BenchResult]:
  '''Wall-clock of one forward pass including the map transform'''
  if repetitions < 1 or warmup < 0:
    raise exception.InputError('repetitions', 'at least one repetition is required')
  results = []
  rng = np.random.default_rng(seed)
  pose = Pose(0.0, 0.0, 0.0)
  for n_meas, n_map in sizes:
    meas, world = _bench_inputs(n_meas, n_map, rng)
    times = _timed(lambda: net.forward(params, meas, geometry.world_to_vehicle(pose, world)), repetitions, warmup)
    results.append(BenchResult(n_meas, n_map, float(times.mean()), float(np.percentile(times, 95)), repetitions))
    _logger.info('forward nu=%d mu=%d: mean %.3f ms, p95 %.3f ms', n_meas, n_map, results[-1].mean_ms, results[-1].p95_ms)
  return results

def bench_mcl(n_particles: int = 1000, n_meas: int = 50, n_map: int = 50, repetitions: int = 20, warmup: int = 2, seed: int = 0) -> BenchResult:
  '''Wall-clock of one particle-filter step on the benchmark inputs'''
  rng = np.random.default_rng(seed)
  meas, world = _bench_inputs(n_meas, n_map, rng)
  landmark_map = LandmarkMap([Landmark(i, geometry.Point2(x, y), Source.LASER) for i, (x, y) in enumerate(world)])
  particles = mcl.ParticleSet.around(Pose(0.0, 0.0, 0.0), n_particles, geometry.PoseOffset(1.0, 1.0, 0.05), rng)
  noise = mcl.MotionNoise()
  times = _timed(lambda: mcl.mcl_baseline_step(particles, meas, landmark_map, noise, rng), repetitions, warmup)
  result = BenchResult(n_meas, n_map, float(times.mean()), float(np.percentile(times, 95)), repetitions)
  _logger.info('mcl %d particles: mean %.3f ms, p95 %.3f ms', n_particles, result.mean_ms, result.p95_ms)
  return result

#--------------------------------------------------------------------#

def emit_report(table: SweepTable, path, fmt: Optional[str] = None) -> None:
  '''CSV (value,rmse_x,rmse_y,rmse_phi) or SVG; byte-deterministic'''
  if not table.rows:
    raise exception.InputError('table', 'nothing to report')
  fmt = fmt or str(path).rsplit('.', 1)[-1].lower()
  if fmt == 'csv':
    with open(path, 'w', newline='') as csv_file:
      writer = csv.writer(csv_file, lineterminator='\n')
      writer.writerow(REPORT_HEADER)
      for value, report in table.rows:
        writer.writerow([repr(value), repr(report.rmse_x), repr(report.rmse_y), repr(report.rmse_phi)])
  elif fmt == 'svg':
    _plot(table, path)
  else:
    raise exception.InputError(fmt, 'report format must be csv or svg')

def _plot(table: SweepTable, path) -> None:
  values = [v for v, _ in table.rows]
  style = {'marker': 'o', 'markersize': 4, 'linewidth': 1.2}
  with matplotlib.rc_context({'svg.hashsalt': 'deeploc', 'svg.fonttype': 'none', 'font.size': 9}):
    fig, (ax_pos, ax_rot) = plt.subplots(2, 1, figsize=(4.5, 5.0), sharex=True)
    try:
      ax_pos.plot(values, [r.rmse_x for _, r in table.rows], label='x', **style)
      ax_pos.plot(values, [r.rmse_y for _, r in table.rows], label='y', **style)
      ax_pos.set_ylabel('position RMSE [m]')
      ax_pos.legend(frameon=False)
      ax_pos.set_title(f'{table.variable} sweep')
      ax_rot.plot(values, [r.rmse_phi for _, r in table.rows], color='C2', **style)
      ax_rot.set_ylabel('orientation RMSE [deg]')
      ax_rot.set_xlabel(AXIS_LABELS[table.variable])
      for ax in (ax_pos, ax_rot):
        ax.grid(True, linewidth=0.3)
      fig.tight_layout()
      fig.savefig(path, format='svg', metadata={'Date': None})
    finally:
      plt.close(fig)
