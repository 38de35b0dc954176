'''Command-line interface

  deeploc gen-world --out world
  deeploc train --world world --out run
  deeploc eval --checkpoint run/checkpoint.json --world world --mode net_ekf_gps
  deeploc sweep --checkpoint run/checkpoint.json --world world --variable clutter
  deeploc bench --checkpoint run/checkpoint.json --mcl

Exit codes: 0 success, 2 usage, 3 IO, 4 numeric failure. Failures are
reported on stderr as a single line

  deeploc: error[<exit code>] <kind>: <message>
'''

import argparse
import csv
import logging
import math
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

import deeploc
from deeploc import evaluation, infer, train, world
from deeploc.auxiliaries import config as run_config
from deeploc.auxiliaries import exception
from deeploc.auxiliaries import logging as deeploc_logging
from deeploc.auxiliaries.config import RunConfig

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

MAP_FILE = 'map.csv'
TRAJECTORY_FILE = 'trajectory.csv'
CHECKPOINT_FILE = 'checkpoint.json'
LOSS_FILE = 'loss.csv'
REPORT_FILE = 'report.csv'
ESTIMATE_FILE = 'estimate.csv'
REPORT_HEADER = ['mode', 'rmse_x', 'rmse_y', 'rmse_phi', 'n_samples', 'time_ms', 'dead_reckoned']
EVAL_MODES = ('synthetic',) + infer.MODES

#--------------------------------------------------------------------#

def _out_dir(config: RunConfig, out_dir) -> Path:
  path = Path(out_dir if out_dir is not None else config.out_dir)
  path.mkdir(parents=True, exist_ok=True)
  return path

def load_world(config: RunConfig, world_dir):
  '''(map, trajectory) from a directory written by cmd_gen_world'''
  world_dir = Path(world_dir)
  landmark_map = world.load_map(world_dir/MAP_FILE, config.world.cell_size)
  trajectory = world.load_trajectory(world_dir/TRAJECTORY_FILE)
  _logger.info('world %s: %d landmarks, %d trajectory points over %.1f m', world_dir, len(landmark_map), len(trajectory), trajectory.length)
  return landmark_map, trajectory

def _predictor(checkpoint, oracle: bool, expected=None):
  if oracle:
    return infer.OraclePredictor()
  if checkpoint is None:
    raise exception.CheckpointError('a checkpoint is required (or --oracle)')
  return infer.NetPredictor(train.load_checkpoint(checkpoint, expected).params)

#--------------------------------------------------------------------#

def cmd_gen_world(config: RunConfig, out_dir=None) -> Path:
  '''Writes map.csv and trajectory.csv'''
  w = config.world
  trajectory = world.generate_trajectory(config.seed, w.duration, w.dt, (w.speed_min, w.speed_max),
                                         (math.radians(w.turn_rate_min_deg), math.radians(w.turn_rate_max_deg)), w.segment_duration)
  landmark_map = world.generate_map(config.seed + 1, trajectory, w.density, w.lateral_spread, w.cell_size)

  out = _out_dir(config, out_dir)
  world.save_map(landmark_map, out/MAP_FILE)
  world.save_trajectory(trajectory, out/TRAJECTORY_FILE)
  counts = ', '.join(f'{source} {count}' for source, count in landmark_map.source_counts().items())
  _logger.info('map: %d landmarks (%s) along %.1f m, %d bytes', len(landmark_map), counts, trajectory.length, os.path.getsize(out/MAP_FILE))
  _logger.info('trajectory: %d points, dt %g s', len(trajectory), trajectory.dt)
  return out

def cmd_train(config: RunConfig, world_dir, out_dir=None, resume=None) -> train.TrainResult:
  '''Runs train_loop; writes checkpoint.json and loss.csv'''
  landmark_map, trajectory = load_world(config, world_dir)
  out = _out_dir(config, out_dir)
  net_config = config.net_config()
  checkpoint = train.load_checkpoint(resume, net_config) if resume else None
  if checkpoint is not None:
    _logger.info('resuming from %s at step %d', resume, checkpoint.step)

  trace_path = out/LOSS_FILE
  previous = _read_trace(trace_path) if checkpoint is not None and trace_path.is_file() else []
  result = train.train_loop(landmark_map, trajectory, net_config, config.train_config(), config.sensor_config(),
                            resume=checkpoint, checkpoint_path=out/CHECKPOINT_FILE)
  # keep the rows up to the resume step, then the new ones
  rows = [row for row in previous if checkpoint is not None and row.step <= checkpoint.step] + result.trace
  train.write_trace(rows, trace_path)
  _logger.info('checkpoint at step %d written to %s', result.checkpoint.step, out/CHECKPOINT_FILE)
  return result

def _read_trace(path) -> List[train.TraceRow]:
  rows = []
  for line, row in world.read_rows(path, train.TRACE_HEADER):
    try:
      rows.append(train.TraceRow(int(row[0]), *(float(v) for v in row[1:])))
    except (ValueError, TypeError) as error:
      raise exception.FormatError(path, line, str(error))
  return rows

def _write_report(path, mode: str, report: evaluation.RmseReport, dead_reckoned: float) -> None:
  with open(path, 'w', newline='') as csv_file:
    writer = csv.writer(csv_file, lineterminator='\n')
    writer.writerow(REPORT_HEADER)
    writer.writerow([mode, repr(report.rmse_x), repr(report.rmse_y), repr(report.rmse_phi), report.n_samples, repr(report.time_ms), repr(dead_reckoned)])

def cmd_eval(config: RunConfig, checkpoint, world_dir, mode: str, out_dir=None, oracle: bool = False) -> evaluation.RmseReport:
  '''Synthetic-offset evaluation or a simulated sequence; writes report.csv'''
  if mode not in EVAL_MODES:
    raise exception.InputError(mode, f'unknown mode, expected one of {", ".join(EVAL_MODES)}')
  landmark_map, trajectory = load_world(config, world_dir)
  predictor = None if mode == 'gps_only' else _predictor(checkpoint, oracle)
  sensor = config.sensor_config()
  out = _out_dir(config, out_dir)

  if mode == 'synthetic':
    impairment = evaluation.Impairment(sensor.lambda_miss, sensor.lambda_clutter, sensor.sigma_syn)
    report = evaluation.synthetic_eval(predictor, landmark_map, trajectory, config.offset_range(), config.eval.trials,
                                       config.seed, impairment, sensor.fov_radius, config.train.load_radius)
    dead_reckoned = 0.0
  else:
    if config.eval.steps:
      trajectory = world.Trajectory(trajectory.points[:config.eval.steps + 1], trajectory.dt)
    result = infer.run_sequence(mode, predictor, landmark_map, trajectory, sensor, config.ekf_config(), np.random.default_rng(config.seed))
    report = evaluation.rmse(result.estimates, result.truths, result.mean_step_ms)
    dead_reckoned = result.dead_reckoned_fraction
    infer.write_estimates(result.records, out/ESTIMATE_FILE)

  if not config.eval.timing:
    report = replace(report, time_ms=float('nan'))
  _write_report(out/REPORT_FILE, mode, report, dead_reckoned)
  _logger.info('%s: rmse %.3f m / %.3f m / %.2f deg over %d samples', mode, report.rmse_x, report.rmse_y, report.rmse_phi, report.n_samples)
  return report

def cmd_sweep(config: RunConfig, checkpoint, world_dir, variable: str, out_dir=None, grid: Optional[Sequence[float]] = None, oracle: bool = False) -> evaluation.SweepTable:
  '''Robustness sweep; writes sweep_<variable>.csv and .svg'''
  spec = evaluation.SweepSpec(variable, grid, config.eval.trials, config.seed)
  predictor = _predictor(checkpoint, oracle)
  landmark_map, trajectory = load_world(config, world_dir)
  table = evaluation.run_sweep(spec, predictor, landmark_map, trajectory, config.offset_range(), config.sensor.fov_radius, config.threads)
  out = _out_dir(config, out_dir)
  evaluation.emit_report(table, out/f'sweep_{variable}.csv', 'csv')
  evaluation.emit_report(table, out/f'sweep_{variable}.svg', 'svg')
  _logger.info('%s sweep: slope of the positional RMSE %.4f', variable, evaluation.trend_slope(table))
  return table

def cmd_bench(config: RunConfig, checkpoint, mcl: bool = False, sizes: Sequence = ((50, 50),), stream=None) -> dict:
  '''Timing report on stdout'''
  stream = stream if stream is not None else sys.stdout
  if checkpoint is None:
    raise exception.CheckpointError('a checkpoint is required')
  params = train.load_checkpoint(checkpoint).params
  results = {'forward': evaluation.bench_inference(params, sizes, config.eval.bench_repetitions, config.eval.bench_warmup, config.seed)}
  for r in results['forward']:
    print(f'forward nu={r.n_meas} mu={r.n_map}: mean {r.mean_ms:.3f} ms p95 {r.p95_ms:.3f} ms', file=stream)
  if mcl:
    n_meas, n_map = sizes[0]
    r = evaluation.bench_mcl(config.eval.mcl_particles, n_meas, n_map, max(1, config.eval.bench_repetitions//5), min(2, config.eval.bench_warmup), config.seed)
    results['mcl'] = r
    ratio = r.mean_ms/results['forward'][0].mean_ms
    print(f'mcl particles={config.eval.mcl_particles} nu={r.n_meas} mu={r.n_map}: mean {r.mean_ms:.3f} ms p95 {r.p95_ms:.3f} ms', file=stream)
    print(f'speed ratio mcl/forward: {ratio:.1f}', file=stream)
  return results

#--------------------------------------------------------------------#

class _Parser(argparse.ArgumentParser):
  '''Usage errors become InputError, reported like every other failure'''
  def error(self, message):
    raise exception.InputError('usage', message)

def _floats(text: str) -> List[float]:
  try:
    return [float(v) for v in text.split(',') if v.strip()]
  except ValueError:
    raise argparse.ArgumentTypeError(f'not a comma-separated list of numbers: {text}')

def _sizes(text: str):
  try:
    return [tuple(int(n) for n in item.lower().split('x')) for item in text.split(',')]
  except ValueError:
    raise argparse.ArgumentTypeError(f'expected sizes like 50x50,100x100: {text}')

def build_parser() -> argparse.ArgumentParser:
  common = _Parser(add_help=False)
  common.add_argument('--config', type=str, default=None, help='configuration file (default: search ~/.deeploc/config, ../deeploc.cfg, ./deeploc.cfg)')
  common.add_argument('--preset', choices=sorted(run_config.PRESETS), default='desk-scale', help='base configuration')
  common.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE', help='override a configuration value')
  common.add_argument('--seed', type=int, default=None, help='seed for all randomness')
  common.add_argument('--threads', type=int, default=None, help='worker threads; 1 is bit-exact deterministic')
  common.add_argument('--log', type=str, default='info', help='logging threshold')
  common.add_argument('--log_dir', type=str, default='log', help='directory for log files')
  common.add_argument('--stdout', action='store_true', help='enables logging to stdout')

  parser = _Parser(prog='deeploc', description=f'deep landmark localization {deeploc.__version__}', allow_abbrev=False)
  commands = parser.add_subparsers(dest='command', required=True)

  p = commands.add_parser('gen-world', parents=[common], help='generate map.csv and trajectory.csv')
  p.add_argument('--out', type=str, default=None, help='output directory')

  p = commands.add_parser('train', parents=[common], help='train the network')
  p.add_argument('--world', type=str, required=True, help='directory with map.csv and trajectory.csv')
  p.add_argument('--out', type=str, default=None, help='output directory')
  p.add_argument('--resume', type=str, default=None, help='checkpoint to continue from')

  p = commands.add_parser('eval', parents=[common], help='evaluate a checkpoint')
  p.add_argument('--checkpoint', type=str, default=None)
  p.add_argument('--world', type=str, required=True)
  p.add_argument('--mode', type=str, default='synthetic', help=f'one of {", ".join(EVAL_MODES)}')
  p.add_argument('--oracle', action='store_true', help='use the oracle instead of the network')
  p.add_argument('--out', type=str, default=None)

  p = commands.add_parser('sweep', parents=[common], help='robustness sweep')
  p.add_argument('--checkpoint', type=str, default=None)
  p.add_argument('--world', type=str, required=True)
  p.add_argument('--variable', type=str, required=True, help=f'one of {", ".join(evaluation.SWEEP_VARIABLES)}')
  p.add_argument('--grid', type=_floats, default=None, help='comma-separated values (default: the full range)')
  p.add_argument('--oracle', action='store_true')
  p.add_argument('--out', type=str, default=None)

  p = commands.add_parser('bench', parents=[common], help='inference timing')
  p.add_argument('--checkpoint', type=str, default=None)
  p.add_argument('--mcl', action='store_true', help='also time the particle-filter baseline')
  p.add_argument('--sizes', type=_sizes, default=[(50, 50)], help='measurement x map sizes, e.g. 50x50,100x100')
  return parser

def _configure(args) -> RunConfig:
  config = run_config.load(args.config, args.preset, args.overrides)
  if args.seed is not None:
    config = replace(config, seed=args.seed)
  if args.threads is not None:
    if args.threads < 1:
      raise exception.InputError('--threads', 'at least one thread is required')
    config = replace(config, threads=args.threads)
  return config

def _run(args) -> None:
  config = _configure(args)
  if args.command == 'gen-world':
    cmd_gen_world(config, args.out)
  elif args.command == 'train':
    cmd_train(config, args.world, args.out, args.resume)
  elif args.command == 'eval':
    cmd_eval(config, args.checkpoint, args.world, args.mode, args.out, args.oracle)
  elif args.command == 'sweep':
    cmd_sweep(config, args.checkpoint, args.world, args.variable, args.out, args.grid, args.oracle)
  elif args.command == 'bench':
    cmd_bench(config, args.checkpoint, args.mcl, args.sizes)

def _classify(error: BaseException):
  '''(exit code, kind)'''
  if isinstance(error, (exception.FormatError, exception.CheckpointError)):
    return EXIT_IO, 'io'
  if isinstance(error, exception.NoLandmarks):
    return EXIT_NUMERIC, error.code
  if isinstance(error, exception.InputError):
    return EXIT_USAGE, 'usage'
  if isinstance(error, OSError):
    return EXIT_IO, 'io'
  if isinstance(error, exception.NumericError):
    return EXIT_NUMERIC, 'numeric'
  return EXIT_FAILURE, 'internal'

def main(argv: Optional[Sequence[str]] = None) -> int:
  root = logging.getLogger()
  handlers = list(root.handlers)
  try:
    args = build_parser().parse_args(argv)
    deeploc_logging.configure(f'deeploc_{args.command}', stdout=args.stdout, loglevel=args.log, log_dir=args.log_dir)
    _run(args)
    return EXIT_OK
  except KeyboardInterrupt:
    _logger.warning('Shutdown due to keyboard interrupt')
    return EXIT_FAILURE
  except (exception.Error, OSError) as error:
    code, kind = _classify(error)
    message = ' '.join(str(error).split())
    _logger.error('%s: %s', kind, message)
    print(f'deeploc: error[{code}] {kind}: {message}', file=sys.stderr)
    return code
  except Exception as error:
    _logger.error(f'unexpected exception\n{traceback.format_exc()}')
    print(f'deeploc: error[{EXIT_FAILURE}] internal: {" ".join(str(error).split())}', file=sys.stderr)
    return EXIT_FAILURE
  finally:
    for handler in root.handlers[:]:
      if handler not in handlers:
        root.removeHandler(handler)
        handler.close()
