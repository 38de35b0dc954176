import math

import numpy as np
import pytest

from deeploc import net, world
from deeploc.geometry import Point2
from deeploc.net import NetConfig
from deeploc.world import Landmark, LandmarkMap, Source


@pytest.fixture(scope='session')
def route():
  '''60 s at about 10 m/s, gentle turns'''
  return world.generate_trajectory(seed=1, duration=60.0, dt=0.1, speed_range=(8.0, 12.0),
                                   turn_rate_range=(-math.radians(3.0), math.radians(3.0)))


@pytest.fixture(scope='session')
def landmark_map(route):
  return world.generate_map(seed=2, route=route, density=772.0)


@pytest.fixture
def small_map():
  '''Four landmarks on a square around the origin'''
  corners = [(10.0, 10.0), (-10.0, 10.0), (-10.0, -10.0), (10.0, -10.0)]
  return LandmarkMap([Landmark(i, Point2(x, y), Source.LASER) for i, (x, y) in enumerate(corners)])


@pytest.fixture
def tiny_params():
  return net.init_params(NetConfig.tiny(), seed=3)


@pytest.fixture
def rng():
  return np.random.default_rng(12345)
