"""Exception types shared across the package.

All numeric/shape errors derive from ValueError so callers that do not care
about the fine-grained category can still catch the usual builtin. The CLI
maps ConfigError to exit code 2 and every other FreqcastError to exit code 3.
"""


class FreqcastError(Exception):
    """Base class for every error raised by this package."""


class InvalidLengthError(FreqcastError, ValueError):
    """A window or transform length is unusable (odd, zero, too short)."""


class InvalidValueError(FreqcastError, ValueError):
    """Numeric input contains NaN/inf or otherwise unusable values."""


class ShapeError(FreqcastError, ValueError):
    """Array dimensions do not line up."""


class InvalidArgumentError(FreqcastError, ValueError):
    """A scalar argument lies outside its documented domain."""


class ParseError(FreqcastError, ValueError):
    """A data file could not be parsed; the message names the row/column."""


class ConfigError(FreqcastError, ValueError):
    """A run configuration failed schema validation."""


class TrainingDivergedError(FreqcastError, RuntimeError):
    """The training loss became non-finite."""
