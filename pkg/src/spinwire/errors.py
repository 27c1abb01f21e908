"""Exception hierarchy shared by the library, the service and the CLI.

The three leaf classes map onto the CLI exit codes (config error -> 2,
numerical failure -> 3, detection failure -> 4).
"""


class SpinwireError(Exception):
    """Base class for all package errors."""


class ConfigError(SpinwireError, ValueError):
    """Invalid configuration, parameters or input shapes."""

    exit_code = 2
    kind = "config"


class NumericalError(SpinwireError, RuntimeError):
    """Numerical failure during integration (NaN/overflow)."""

    exit_code = 3
    kind = "numerical"


class DetectionError(SpinwireError, RuntimeError):
    """Tracking/fitting failure (no soliton, unusable data)."""

    exit_code = 4
    kind = "detection"
