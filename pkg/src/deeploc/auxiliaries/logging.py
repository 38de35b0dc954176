'''logging auxiliaries'''

import logging
import os
import sys
import time
from logging.handlers import RotatingFileHandler

import deeploc
from deeploc.auxiliaries import exception, git

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

FORMAT = '%(asctime)s: %(levelname)s [%(name)s] %(message)s'

#--------------------------------------------------------------------#

def configure(filename: str = '', stdout: bool = True, rotating: bool = False, loglevel: str = 'INFO', log_dir: str = 'log') -> str:
  '''configure logging, returns the path of the log file'''

  # validate the level before touching the file system
  numeric_level = getattr(logging, loglevel.upper(), None)
  if not isinstance(numeric_level, int):
    raise exception.InputError(loglevel, 'invalid log level')

  if not os.path.isdir(log_dir):
    try:
      os.makedirs(log_dir)
    except OSError:
      raise exception.Error(f'Creation of the log directory "{log_dir}" failed')

  timestamp = time.strftime('%Y%m%d_%H%M%S')
  filename = f'{timestamp}_{filename}' if filename else timestamp
  if not filename.endswith('.log'):
    filename += '.log'
  path = os.path.join(log_dir, filename)

  formatter = logging.Formatter(FORMAT)
  root = logging.getLogger()
  if rotating:
    handler = RotatingFileHandler(filename=path, mode='a', maxBytes=5*1024*1024, backupCount=2)
    if os.path.isfile(path):
      handler.doRollover()
  else:
    handler = logging.FileHandler(path, mode='w')
  handler.setFormatter(formatter)
  root.addHandler(handler)

  if stdout:
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(formatter)
    root.addHandler(handler)

  logging.getLogger('deeploc').setLevel(numeric_level)

  # always log version and command line arguments
  _logger.info(f'{sys.argv[0]} {deeploc.__version__} {git.describe()}')
  _logger.info(f'arguments: {sys.argv[1:]}')
  return path
