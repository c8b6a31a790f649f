class ExoQelmError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ExoQelmError, ValueError):
    pass


class DatasetFormatError(ExoQelmError, ValueError):
    """Malformed dataset file. ``row`` is the 1-based line number, if known."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"line {row}: {message}"
        super().__init__(message)


class NumericalError(ExoQelmError, ArithmeticError):
    pass


class StageError(ExoQelmError):
    """A pipeline stage failed; wraps the original exception."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
