"""Exception hierarchy shared by all depfuse modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataFormatError -> 3,
NumericalError -> 4. Everything else is a programming error and escapes.
"""


class DepfuseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DepfuseError):
    """Invalid or contradictory configuration (bad ratio, bad model dims, ...)."""


class DataFormatError(DepfuseError):
    """A file or stream does not conform to its documented format."""


class UsageError(DepfuseError):
    """An API was called in a way its contract forbids."""


class DimensionError(UsageError):
    """Tensor shapes are incompatible for the requested operation."""


class NumericalError(DepfuseError):
    """A forward operation produced a non-finite value."""


class FeatureError(DepfuseError):
    """Feature extraction failed (e.g. a sentiment scorer raised)."""
