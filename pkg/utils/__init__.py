"""
Utility functions for errors, file handling and validation.
"""
from .errors import ConfigError, DataError, FdvError, NumericError
from .file_handler import DatasetHandler
from .validators import ConfigValidator, DatasetValidator

__all__ = ['ConfigError', 'DataError', 'FdvError', 'NumericError', 'DatasetHandler', 'ConfigValidator', 'DatasetValidator']
