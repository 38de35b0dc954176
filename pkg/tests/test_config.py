import math

import numpy as np
import pytest

from deeploc.auxiliaries import config, exception
from deeploc.auxiliaries.config import RunConfig


def test_presets():
  assert config.RunConfig.desk().net_config().D == 128
  paper = RunConfig.paper()
  assert paper.net_config().D == 1024
  assert paper.train_config().batch_size == 500
  assert paper.train_config().learning_rate == 1e-5


def test_parse_assignments():
  text = '''# desk run with clutter
seed = 7
sensor.lambda_clutter = 20
net.meas_widths = (16, 32, 64)
net.map_widths = (16, 32, 64)   # both encoders
train.measurements = sensor
ekf.gps_heading = yes
'''
  parsed = config.parse(text)
  assert parsed.seed == 7
  assert parsed.sensor.lambda_clutter == 20.0
  assert isinstance(parsed.sensor.lambda_clutter, float)
  assert parsed.net_config().D == 64
  assert parsed.train.measurements == 'sensor'
  assert parsed.ekf.gps_heading is True


def test_degrees_become_radians():
  parsed = config.parse('sensor.gps_sigma_phi_deg = 5\noffset.sigma_phi_deg = 4\nekf.r_net_phi_deg = 1\n')
  assert parsed.sensor_config().gps_sigma_phi == pytest.approx(math.radians(5.0))
  assert parsed.offset_range().sigma_phi == pytest.approx(math.radians(4.0))
  assert parsed.ekf_config().R_net[2, 2] == pytest.approx(math.radians(1.0)**2)


def test_offset_preset():
  parsed = config.parse('offset.preset = 0.5m-2deg\n')
  assert parsed.offset_range().sigma_x == 0.5
  with pytest.raises(exception.InputError):
    config.parse('offset.preset = 3m\n').offset_range()


def test_unknown_key_names_the_line():
  with pytest.raises(exception.FormatError) as error:
    config.parse('seed = 1\nsensor.lambda_clutter = 2\nsensor.clutter = 3\n', path='run.cfg')
  assert error.value.line == 3
  assert 'run.cfg:3' in str(error.value)


def test_wrong_type_names_the_line():
  with pytest.raises(exception.FormatError) as error:
    config.parse('\n\ntrain.batch_size = large\n')
  assert error.value.line == 3


def test_line_without_assignment():
  with pytest.raises(exception.FormatError) as error:
    config.parse('seed = 1\njust words\n')
  assert error.value.line == 2


def test_set_value():
  updated = config.set_value(RunConfig(), 'train.steps', '50')
  assert updated.train.steps == 50
  assert RunConfig().train.steps == 20000
  with pytest.raises(exception.InputError):
    config.set_value(RunConfig(), 'train.steps', '2.5')
  with pytest.raises(exception.InputError):
    config.set_value(RunConfig(), 'weather.rain', '1')
  with pytest.raises(exception.InputError):
    config.set_value(RunConfig(), 'net.meas_widths', '64')


def test_dump_round_trip():
  original = config.set_value(RunConfig.paper(), 'offset.preset', '1m-4deg')
  assert config.parse(config.dump(original), RunConfig()) == original


def test_load_file_then_overrides(tmp_path):
  path = tmp_path/'deeploc.cfg'
  path.write_text('seed = 3\nworld.duration = 60\n')
  loaded = config.load(path, 'desk-scale', ['world.duration=30', 'threads=2'])
  assert loaded.seed == 3
  assert loaded.world.duration == 30.0
  assert loaded.threads == 2


def test_load_searches_the_working_directory(tmp_path, monkeypatch):
  monkeypatch.setenv('HOME', str(tmp_path/'home'))
  work = tmp_path/'work'
  work.mkdir()
  (work/'deeploc.cfg').write_text('seed = 11\n')
  monkeypatch.chdir(work)
  assert config.load().seed == 11


def test_load_errors(tmp_path, monkeypatch):
  monkeypatch.setenv('HOME', str(tmp_path))
  monkeypatch.chdir(tmp_path)
  with pytest.raises(exception.InputError):
    config.load(tmp_path/'none.cfg', 'huge-scale')
  with pytest.raises(exception.FormatError):
    config.load(tmp_path/'none.cfg')
  with pytest.raises(exception.InputError):
    config.load(overrides=['seed'])


def test_domain_configurations_validate():
  with pytest.raises(exception.InputError):
    config.set_value(RunConfig(), 'sensor.fov_radius', '0').sensor_config()
  ekf = RunConfig().ekf_config()
  assert np.all(np.linalg.eigvalsh(ekf.P0) > 0.0)
