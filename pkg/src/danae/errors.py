"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ConfigError (and subclasses) -> 2,
DataError/InvalidInputError -> 3, NumericalError -> 4.
"""


class DanaeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DanaeError):
    """Invalid configuration, option value, or usage."""


class ShapeError(ConfigError):
    """Mismatched or impossible array/series shapes."""


class InvalidInputError(DanaeError, ValueError):
    """Input values that violate an operation's preconditions."""


class DataError(DanaeError):
    """Malformed or internally inconsistent data files."""


class NumericalError(DanaeError):
    """Numerical failure: singular matrices, gimbal lock, divergence."""


class StateError(DanaeError):
    """Operation called in the wrong order (e.g. backward before forward)."""
