class BioclustError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BioclustError):
    """Invalid configuration (rules, presets, flags)."""


class DataError(BioclustError):
    """Invalid or unreadable input data."""


class FastaParseError(DataError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
