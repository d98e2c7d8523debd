"""Exception and warning classes raised by fodgmm."""

import numpy as np


class GMMError(Exception):
    """Base class for all fodgmm errors.

    ``code`` is a short machine-readable tag used when failures are written
    to CSV output.
    """

    code = "error"


class InvalidDimensionError(GMMError, ValueError):
    code = "invalid-dimension"


class InvalidIndexError(GMMError, IndexError):
    code = "invalid-index"


class InvalidInstrumentError(GMMError, ValueError):
    code = "invalid-instrument"


class FactorizationError(GMMError, np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""

    code = "factorization"

    def __init__(self, message, pivot_index):
        super().__init__(message)
        self.pivot_index = pivot_index


class SingularWeightingError(GMMError, np.linalg.LinAlgError):
    """The matrix whose inverse is the GMM weighting matrix is singular."""

    code = "singular-weighting"

    def __init__(self, message, n_moments=None, n_individuals=None, pivot_index=None):
        if n_moments is not None and n_individuals is not None:
            message = f"{message} ({n_moments} moments, {n_individuals} individuals)"
        super().__init__(message)
        self.n_moments = n_moments
        self.n_individuals = n_individuals
        self.pivot_index = pivot_index


class IdentificationError(GMMError, np.linalg.LinAlgError):
    """X'Z W Z'X is singular, so the coefficients are not identified."""

    code = "identification"

    def __init__(self, message, condition_number=None):
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3g})"
        super().__init__(message)
        self.condition_number = condition_number


class EmptySummaryError(GMMError, ValueError):
    code = "empty-summary"


class UndefinedRatioError(GMMError, ZeroDivisionError):
    code = "undefined-ratio"


class PanelFormatError(GMMError, ValueError):
    """A panel CSV file is malformed or unbalanced."""

    code = "panel-format"


class ConfigError(GMMError, ValueError):
    code = "config"

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class DegenerateDataWarning(UserWarning):
    """Stacked instruments are (nearly) rank deficient across individuals."""


class NearSingularWeightingWarning(UserWarning):
    pass
