'''git auxiliaries'''

import logging
import traceback

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#

_logger = logging.getLogger(__name__)

#--------------------------------------------------------------------#

def describe() -> str:
  '''git describe of the working tree, "??" outside of a repository'''
  try:
    import git
    repo = git.Repo(search_parent_directories=True)
    return repo.git.describe('--always', '--dirty')
  except Exception:
    _logger.debug(traceback.format_exc())
    return '??'
