"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit with 2,
data problems with 3, numerical failures with 4.
"""


class QpredictError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QpredictError, ValueError):
    """Invalid parameters or grid/config documents."""


class DataError(QpredictError, ValueError):
    """Input data that cannot be used (too short, non-finite, malformed)."""


class DegenerateRegressorError(DataError):
    """A regressor or instrument carries no variation."""


class NumericalError(QpredictError, RuntimeError):
    """A numerical procedure failed to produce a usable answer."""


class ExplosivePathError(NumericalError):
    """A simulated path left the representable range."""


class CalibrationError(NumericalError):
    """Too few bootstrap replications converged to calibrate a test."""
