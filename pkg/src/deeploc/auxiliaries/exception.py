'''deeploc exceptions'''

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

class Error(Exception):
  '''Base class for exceptions in this package.'''

class InputError(Error):
  '''Exception raised for errors in the input.

  Attributes:
  expr -- input expression in which the error occurred
  msg  -- explanation of the error
  '''
  def __init__(self, expr, msg):
    Error.__init__(self, f'{expr}: {msg}')
    self.expr = expr
    self.msg = msg

class FormatError(Error):
  '''Exception raised for malformed files.

  Attributes:
  path -- the offending file
  line -- 1-based line number, None if the whole file is at fault
  msg  -- explanation of the error
  '''
  def __init__(self, path, line, msg):
    where = f'{path}:{line}' if line is not None else f'{path}'
    Error.__init__(self, f'{where}: {msg}')
    self.path = path
    self.line = line
    self.msg = msg

class CheckpointError(Error):
  '''Exception raised for corrupt or incompatible checkpoints'''
  def __init__(self, msg):
    Error.__init__(self, msg)
    self.msg = msg

class EmptyPointSet(InputError):
  '''Exception raised if the network receives an empty point list'''
  def __init__(self, which):
    InputError.__init__(self, which, 'point list is empty')
    self.which = which

class NoLandmarks(Error):
  '''Exception raised if an inference step has nothing to match against'''
  code = 'no-landmarks'

  def __init__(self, pose, msg='no landmarks'):
    Error.__init__(self, f'{self.code}: {msg} around {pose}')
    self.pose = pose
    self.msg = msg

class SampleRejected(Error):
  '''Exception raised if a training sample cannot be built; the caller redraws'''
  def __init__(self, reason):
    Error.__init__(self, reason)
    self.reason = reason

class NumericError(Error):
  '''Exception raised for numeric failures (non-finite loss, singular matrices)'''
  def __init__(self, msg):
    Error.__init__(self, msg)
    self.msg = msg

class TrainingAborted(NumericError):
  '''Exception raised if training cannot continue'''
