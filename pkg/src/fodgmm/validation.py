"""Input validation helpers shared by the estimators and the CLI."""

import numbers

import numpy as np

from .exceptions import InvalidDimensionError

__all__ = ["check_panel_arrays", "check_period_count", "check_matrix", "check_random_seed"]


def check_period_count(T, minimum=2, name="T"):
    """Return ``T`` as an int, raising if it is not an integer >= ``minimum``."""
    if isinstance(T, bool) or not isinstance(T, numbers.Integral):
        raise InvalidDimensionError(f"{name} must be an integer, got {T!r}")
    T = int(T)
    if T < minimum:
        raise InvalidDimensionError(f"{name} must be >= {minimum}, got {T}")
    return T


def check_matrix(a, name="matrix", ndim=2):
    a = np.asarray(a, dtype=float)
    if a.ndim != ndim:
        raise InvalidDimensionError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return a


def check_panel_arrays(y, x):
    """Validate level arrays of a balanced panel.

    Parameters
    ----------
    y : array-like of shape (n_individuals, n_periods)
        Outcome levels for periods ``0..T``.
    x : array-like of shape (n_individuals, n_periods) or (n_individuals, n_periods, n_regressors)
        Regressor levels for the same periods. A 2-D array is treated as a
        single regressor.

    Returns
    -------
    y, x : ndarray
        ``y`` as float (N, T+1) and ``x`` as float (N, T+1, P).
    """
    y = check_matrix(y, "y", ndim=2)
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise InvalidDimensionError(f"x must be 2- or 3-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains NaN or infinite entries")
    if x.shape[:2] != y.shape:
        raise InvalidDimensionError(
            f"x has shape {x.shape[:2]} in (individual, period) but y has {y.shape}"
        )
    if x.shape[2] < 1:
        raise InvalidDimensionError("at least one regressor is required")
    if y.shape[0] < 1:
        raise InvalidDimensionError("panel has no individuals")
    check_period_count(y.shape[1] - 1, name="T (final period index)")
    return y, x


def check_random_seed(seed):
    """Seeds are non-negative integers below 2**64."""
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return seed
