#!/usr/bin/env python3
'''APP "deeploc": world generation, training, evaluation, sweeps and benchmarks

  python src/app/app_deeploc.py gen-world --out world --stdout
'''

import os
import sys

# the package lives next to this directory
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

import deeploc.cli

#--------------------------------------------------------------------#

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'

#--------------------------------------------------------------------#
def _main():
  sys.exit(deeploc.cli.main(sys.argv[1:]))

#--------------------------------------------------------------------#
if __name__ == '__main__':
  _main()
