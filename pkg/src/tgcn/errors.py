"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` -> 3,
``NumericalError`` -> 4.
"""


class TGCNError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(TGCNError, ValueError):
    """Invalid configuration, flag combination or argument value."""


class DataError(TGCNError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(TGCNError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class GraphDiagnostic(UserWarning):
    """Non-fatal condition worth surfacing (dropped self-loops, isolated nodes)."""
