"""Exception types raised across the package."""


class FactorSegError(Exception):
    """Base class for every error raised deliberately by factorseg."""


class ConfigError(FactorSegError, ValueError):
    """Raised when a configuration value is out of its documented range."""


class FormatError(FactorSegError, ValueError):
    """Raised when an input file is not a rectangular CSV."""


class ParseError(FactorSegError, ValueError):
    """Raised when a CSV cell cannot be read as a finite number."""

    def __init__(self, message: str, row: int, col: int):
        super().__init__(f"{message} (row {row}, column {col})")
        self.row = row
        self.col = col


class DimensionError(FactorSegError, ValueError):
    """Raised when an array has too few series, time points or factors."""


class RangeError(FactorSegError, ValueError):
    """Raised when a time interval falls outside the panel or is degenerate."""


class IntervalError(FactorSegError, ValueError):
    """Raised when an interval has its end at or before its start."""


class InputError(FactorSegError, ValueError):
    """Raised when a matrix fails a structural check, e.g. symmetry."""


class ScaleError(FactorSegError, ValueError):
    """Raised when a wavelet scale is outside the supported range."""


class LengthError(FactorSegError, ValueError):
    """Raised when a series is too short for a filter, or lengths disagree."""


class DegenerateInputError(FactorSegError, ValueError):
    """Raised when a statistic is undefined because the input has no variation."""


class ResourceError(FactorSegError):
    """Raised when a requested computation would exceed the configured row cap."""
