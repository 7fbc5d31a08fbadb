"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` so the CLI can map failures onto its
documented status codes without a lookup table.
"""


class EpiPolicyError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 5


class DomainError(EpiPolicyError, ValueError):
    """An input lies outside the domain of an operation."""

    exit_code = 4


class CoverageError(EpiPolicyError, ValueError):
    """A time series does not cover the requested horizon or date range."""

    exit_code = 3


class IntegrationError(EpiPolicyError, ArithmeticError):
    exit_code = 4


class AlignmentError(EpiPolicyError, ValueError):
    """Trajectory and observations are not on the same daily grid."""

    exit_code = 3


class SeedError(EpiPolicyError, ValueError):
    """The optimizer seed evaluates to a non-finite objective."""

    exit_code = 4


class FitError(EpiPolicyError, RuntimeError):
    """A calibration or regression failed.

    ``best`` holds whatever partial result was available when it failed.
    """

    exit_code = 4

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigurationError(EpiPolicyError, ValueError):
    exit_code = 2


class EpisodeError(EpiPolicyError, RuntimeError):
    """``step`` was called on a finished episode."""

    exit_code = 5


class ModelHealthError(EpiPolicyError, FloatingPointError):
    """A value network produced non-finite outputs or diverged."""

    exit_code = 4


class DataError(EpiPolicyError, ValueError):
    """Malformed or missing input data."""

    exit_code = 3


class ParseError(DataError):
    pass


class DataLookupError(DataError, LookupError):
    """Requested country or quarter is not present in a source file."""
