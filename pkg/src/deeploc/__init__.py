'''Deep landmark localization'''

__version__ = '1.0.0'
__copyright__ = 'Copyright (c) 2026'
__status__ = 'development'
