"""
Exception types shared by the library and mapped to CLI exit codes.
"""


class FdvError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(FdvError, ValueError):
    """Invalid or unknown configuration values."""

    exit_code = 1


class DataError(FdvError, ValueError):
    """Unreadable images, bad dataset layout or unusable model files."""

    exit_code = 2


class NumericError(FdvError, ArithmeticError):
    """Non-finite values produced during training or scoring."""

    exit_code = 3

    def __init__(self, message, round_index=None, telemetry=None):
        super().__init__(message)
        self.round_index = round_index
        self.telemetry = telemetry
