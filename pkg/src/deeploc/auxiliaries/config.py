'''Run configuration

Flat key-value files, one `section.key = value` per line:

  # desk run with clutter
  seed = 7
  sensor.lambda_clutter = 20
  net.meas_widths = (32, 64, 128)

Values are Python literals; bare words are taken as strings. Keys ending
in _deg are degrees and are converted to radians when the domain
configurations are built. Every key can be overridden with
`--set section.key=value` on the command line.
'''

import ast
import configparser
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np

from deeploc.auxiliaries import exception

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

_ROOT = 'deeploc'

#--------------------------------------------------------------------#

@dataclass(frozen=True)
class WorldSection:
  duration: float = 500.0
  dt: float = 0.1
  speed_min: float = 8.0
  speed_max: float = 12.0
  turn_rate_min_deg: float = -5.0
  turn_rate_max_deg: float = 5.0
  segment_duration: float = 5.0
  # landmarks per km of route
  density: float = 772.0
  lateral_spread: float = 30.0
  cell_size: float = 25.0

@dataclass(frozen=True)
class SensorSection:
  fov_radius: float = 50.0
  lambda_clutter: float = 0.0
  lambda_miss: float = 0.0
  sigma_syn: float = 0.0
  gps_sigma_xy: float = 2.0
  gps_sigma_phi_deg: float = 10.0

@dataclass(frozen=True)
class NetSection:
  meas_widths: Tuple[int, ...] = (32, 64, 128)
  map_widths: Tuple[int, ...] = (32, 64, 128)
  head_widths: Tuple[int, ...] = (128, 64, 3)
  dropout_rate: float = 0.3

@dataclass(frozen=True)
class TrainSection:
  batch_size: int = 64
  learning_rate: float = 1e-4
  steps: int = 20000
  load_radius: float = 100.0
  measurements: str = 'map'
  log_every: int = 100
  checkpoint_every: int = 1000
  heldout_size: int = 64

@dataclass(frozen=True)
class OffsetSection:
  # a named preset wins over the explicit values
  preset: Optional[str] = None
  sigma_x: float = 2.0
  sigma_y: float = 2.0
  sigma_phi_deg: float = 10.0

@dataclass(frozen=True)
class EkfSection:
  '''Standard deviations; the filter uses their squares'''
  q_xy: float = 0.05
  q_phi_deg: float = 0.5
  q_v: float = 0.5
  q_omega_deg: float = 2.0
  r_net_xy: float = 0.3
  r_net_phi_deg: float = 2.0
  p0_xy: float = 2.0
  p0_phi_deg: float = 10.0
  p0_v: float = 10.0
  p0_omega_deg: float = 30.0
  gps_heading: bool = False

@dataclass(frozen=True)
class EvalSection:
  trials: int = 500
  # sequence length in steps, 0 for the whole trajectory
  steps: int = 0
  # per-step timings make report.csv differ from run to run
  timing: bool = False
  bench_repetitions: int = 100
  bench_warmup: int = 10
  mcl_particles: int = 1000

@dataclass(frozen=True)
class RunConfig:
  world: WorldSection = field(default_factory=WorldSection)
  sensor: SensorSection = field(default_factory=SensorSection)
  net: NetSection = field(default_factory=NetSection)
  train: TrainSection = field(default_factory=TrainSection)
  offset: OffsetSection = field(default_factory=OffsetSection)
  ekf: EkfSection = field(default_factory=EkfSection)
  eval: EvalSection = field(default_factory=EvalSection)
  seed: int = 0
  out_dir: str = 'out'
  threads: int = 1

  @classmethod
  def desk(cls) -> 'RunConfig':
    '''D = 128, batch 64, learning rate 1e-4'''
    return cls()

  @classmethod
  def paper(cls) -> 'RunConfig':
    '''D = 1024, batch 500, learning rate 1e-5'''
    return cls(net=NetSection((64, 256, 1024), (64, 256, 1024), (512, 256, 64, 3), 0.3),
               train=TrainSection(batch_size=500, learning_rate=1e-5, steps=100000))

  #------------------------------------------------------------------#
  # domain configurations

  def sensor_config(self):
    from deeploc.sensors import SensorConfig
    s = self.sensor
    return SensorConfig(s.fov_radius, s.lambda_clutter, s.lambda_miss, s.sigma_syn, s.gps_sigma_xy, math.radians(s.gps_sigma_phi_deg))

  def net_config(self):
    from deeploc.net import NetConfig
    n = self.net
    return NetConfig(n.meas_widths, n.map_widths, n.head_widths, n.dropout_rate)

  def offset_range(self):
    from deeploc.train import OFFSET_PRESETS, OffsetRange
    o = self.offset
    if o.preset is not None:
      if o.preset not in OFFSET_PRESETS:
        raise exception.InputError('offset.preset', f'unknown preset {o.preset}, expected one of {", ".join(OFFSET_PRESETS)}')
      return OFFSET_PRESETS[o.preset]
    return OffsetRange(o.sigma_x, o.sigma_y, math.radians(o.sigma_phi_deg))

  def train_config(self):
    from deeploc.train import TrainConfig
    t = self.train
    return TrainConfig(batch_size=t.batch_size, learning_rate=t.learning_rate, steps=t.steps,
                       offset_range=self.offset_range(), seed=self.seed, load_radius=t.load_radius,
                       measurements=t.measurements, log_every=t.log_every, checkpoint_every=t.checkpoint_every,
                       heldout_size=t.heldout_size, threads=self.threads)

  def ekf_config(self):
    from deeploc.infer import EkfConfig
    e = self.ekf
    rad = math.radians
    return EkfConfig(Q=np.diag([e.q_xy**2, e.q_xy**2, rad(e.q_phi_deg)**2, e.q_v**2, rad(e.q_omega_deg)**2]),
                     R_net=np.diag([e.r_net_xy**2, e.r_net_xy**2, rad(e.r_net_phi_deg)**2]),
                     P0=np.diag([e.p0_xy**2, e.p0_xy**2, rad(e.p0_phi_deg)**2, e.p0_v**2, rad(e.p0_omega_deg)**2]),
                     gps_heading=e.gps_heading)

PRESETS = {'desk-scale': RunConfig.desk, 'paper-scale': RunConfig.paper}

#--------------------------------------------------------------------#

def _parse_value(raw: str):
  try:
    return ast.literal_eval(raw)
  except (ValueError, SyntaxError):
    return raw

def _coerce(key: str, value, default):
  '''value converted to the type of the default'''
  if default is None or key.endswith('offset.preset'):
    if value is None or value in ('None', 'none', ''):
      return None
    if not isinstance(value, str):
      raise exception.InputError(key, f'{value!r} is not a valid name')
    return value
  try:
    if isinstance(default, bool):
      if isinstance(value, str) and value.lower() in ('true', 'false', 'yes', 'no', 'on', 'off'):
        return value.lower() in ('true', 'yes', 'on')
      if not isinstance(value, (bool, int)):
        raise TypeError(value)
      return bool(value)
    if isinstance(default, tuple):
      if isinstance(value, (int, float)) or isinstance(value, str):
        raise TypeError(value)
      return tuple(int(v) for v in value)
    if isinstance(default, int):
      if isinstance(value, float) and not value.is_integer():
        raise TypeError(value)
      return int(value)
    if isinstance(default, float):
      if isinstance(value, bool) or isinstance(value, str):
        raise TypeError(value)
      return float(value)
    return str(value)
  except (TypeError, ValueError):
    raise exception.InputError(key, f'{value!r} is not a valid {type(default).__name__}')

def set_value(config: RunConfig, key: str, value) -> RunConfig:
  '''Copy of config with `section.key` (or a top-level key) replaced'''
  if isinstance(value, str):
    value = _parse_value(value.strip())
  parts = key.strip().split('.')
  if len(parts) == 1:
    name = parts[0]
    if name not in ('seed', 'out_dir', 'threads'):
      raise exception.InputError(key, 'unknown configuration key')
    return dataclasses.replace(config, **{name: _coerce(key, value, getattr(config, name))})
  if len(parts) != 2:
    raise exception.InputError(key, 'expected section.key')
  section_name, name = parts
  section = getattr(config, section_name, None)
  if not dataclasses.is_dataclass(section):
    raise exception.InputError(key, f'unknown section {section_name}')
  if name not in {f.name for f in dataclasses.fields(section)}:
    raise exception.InputError(key, 'unknown configuration key')
  section = dataclasses.replace(section, **{name: _coerce(key, value, getattr(section, name))})
  return dataclasses.replace(config, **{section_name: section})

def parse(text: str, config: Optional[RunConfig] = None, path='<string>') -> RunConfig:
  '''Applies the assignments in text to config (default: desk preset)'''
  config = config if config is not None else RunConfig.desk()
  parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#',), delimiters=('=',))
  parser.optionxform = str
  try:
    # the format has no sections of its own
    parser.read_string(f'[{_ROOT}]\n{text}', source=str(path))
  except configparser.Error as error:
    line = getattr(error, 'lineno', None)
    if line is None and getattr(error, 'errors', None):
      line = error.errors[0][0]
    raise exception.FormatError(path, line - 1 if line else None, error.message.splitlines()[0])
  for key, raw in parser[_ROOT].items():
    try:
      config = set_value(config, key, raw)
    except exception.InputError as error:
      raise exception.FormatError(path, _line_of(text, key), error.msg if error.expr == key else str(error))
  return config

def _line_of(text: str, key: str):
  for number, line in enumerate(text.splitlines(), 1):
    if line.split('=', 1)[0].strip() == key:
      return number
  return None

def search_paths():
  return [Path.home().joinpath('.deeploc', 'config'),
          Path.cwd().parent.joinpath('deeploc.cfg'),
          Path.cwd().joinpath('deeploc.cfg')]

def load(path=None, preset: str = 'desk-scale', overrides: Iterable[str] = ()) -> RunConfig:
  '''preset, then the file (given or first found), then the overrides'''
  if preset not in PRESETS:
    raise exception.InputError(preset, f'unknown preset, expected one of {", ".join(PRESETS)}')
  config = PRESETS[preset]()

  if path is None:
    path = next((p for p in search_paths() if p.is_file()), None)
    if path is None:
      _logger.info('no configuration file found, using the %s preset', preset)
  if path is not None:
    _logger.info('configuration file found at "%s"', path)
    try:
      text = Path(path).read_text()
    except OSError as error:
      raise exception.FormatError(path, None, f'cannot read configuration ({error.strerror})')
    config = parse(text, config, path)

  for override in overrides:
    if '=' not in override:
      raise exception.InputError(override, 'expected section.key=value')
    key, value = override.split('=', 1)
    config = set_value(config, key, value)
  return config

def dump(config: RunConfig) -> str:
  '''The configuration in the file format; parse(dump(c)) == c'''
  lines = [f'seed = {config.seed!r}', f'out_dir = {config.out_dir!r}', f'threads = {config.threads!r}']
  for section in ('world', 'sensor', 'net', 'train', 'offset', 'ekf', 'eval'):
    values = getattr(config, section)
    lines.extend(f'{section}.{f.name} = {getattr(values, f.name)!r}' for f in dataclasses.fields(values))
  return '\n'.join(lines) + '\n'
