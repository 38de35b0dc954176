'''deeploc auxiliaries

Cross-cutting helpers: configuration, exceptions, logging, version
stamping and the Kalman filter. Import the submodules explicitly, e.g.
  from deeploc.auxiliaries import exception
'''

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'
