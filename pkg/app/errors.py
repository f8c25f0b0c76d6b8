"""
Exception hierarchy shared by the services, the CLI and the HTTP layer.
"""
from typing import Optional, Sequence


class TransistorError(Exception):
    """Base class for all domain errors."""


class InvalidDimensionError(TransistorError, ValueError):
    """Operator or state dimensions do not fit together."""


class ResonanceSingularityError(TransistorError, ValueError):
    """An effective-coupling denominator vanishes."""


class NoRootError(TransistorError, ValueError):
    """The effective coupling does not change sign on the interval."""


class InvalidIntervalError(TransistorError, ValueError):
    """A search interval contains a singularity or is malformed."""


class InvalidCoherenceError(TransistorError, ValueError):
    """Coherence times violate T2 <= 2 T1."""


class IncompleteDataError(TransistorError, ValueError):
    """Tomography records do not cover every measurement basis."""


class RankError(TransistorError, ValueError):
    """Input states are not informationally complete."""


class ConventionError(TransistorError, ValueError):
    """Process matrices do not follow the trace-one convention."""


class SingularMatrixError(TransistorError, ValueError):
    """A readout transfer matrix cannot be inverted."""


class FitError(TransistorError):
    """
    Oscillation fit failed to converge.

    Carries the residuals of the last iterate so callers can inspect them.
    """

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class ConfigError(TransistorError, ValueError):
    """
    Invalid run configuration.

    The offending key is kept in ``key`` for exit messages.
    """

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
