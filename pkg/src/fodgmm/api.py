"""scikit-learn compatible wrappers around the GMM estimators and transforms."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .estimators import estimate
from .instruments import get_scheme
from .panel import PanelData
from .transforms import equivalent_transform, first_difference_matrix, fod_matrix
from .validation import check_panel_arrays

__all__ = ["DynamicPanelGMM", "PanelTransformer"]


class DynamicPanelGMM(BaseEstimator):
    """GMM estimator of ``y_it = delta y_{i,t-1} + x_it' alpha + eta_i + v_it``.

    Parameters
    ----------
    transform : {"fd", "fod"}, default="fod"
        Transformation removing the individual effects.
    scheme : {"recent-lags", "all-lags"} or InstrumentScheme, default="recent-lags"
    step : {1, 2}, default=2
    system : bool, default=False
        Stack levels equations instrumented by lagged differences.

    Attributes
    ----------
    coef_ : ndarray of shape (1 + n_features_in_,)
        ``(delta, alpha_1, ..., alpha_P)``.
    estimate_ : GmmEstimate
    n_moments_ : int
    n_periods_ : int
        Final period index ``T`` of the training panel.

    Examples
    --------
    >>> from fodgmm import DesignPoint, generate_panel
    >>> from fodgmm.api import DynamicPanelGMM
    >>> panel = generate_panel(DesignPoint(N=200, T=6), 0)
    >>> model = DynamicPanelGMM(transform="fod").fit(panel.x, panel.y)
    >>> model.coef_.shape
    (2,)
    """

    def __init__(self, transform="fod", scheme="recent-lags", step=2, system=False):
        self.transform = transform
        self.scheme = scheme
        self.step = step
        self.system = system

    def fit(self, X, y):
        """Fit on regressor levels ``X`` (N, T+1[, P]) and outcome levels ``y`` (N, T+1)."""
        if self.transform not in ("fd", "fod"):
            raise ValueError(f"transform must be 'fd' or 'fod', got {self.transform!r}")
        if self.step not in (1, 2):
            raise ValueError(f"step must be 1 or 2, got {self.step!r}")
        get_scheme(self.scheme)
        panel = PanelData(y, X)
        self.estimate_ = estimate(panel, self.transform, self.scheme, self.step, bool(self.system))
        self.coef_ = self.estimate_.beta
        self.n_moments_ = self.estimate_.moments
        self.n_periods_ = panel.T
        self.n_features_in_ = panel.P
        return self

    @property
    def delta_(self):
        check_is_fitted(self, "coef_")
        return float(self.coef_[0])

    @property
    def alpha_(self):
        check_is_fitted(self, "coef_")
        return self.coef_[1:]

    def predict(self, X, y):
        """Linear index ``delta y_{i,t-1} + x_it' alpha`` for periods 1..T.

        The individual effect is not estimated, so predictions exclude it.
        Returns an array of shape (N, T).
        """
        check_is_fitted(self, "coef_")
        y, X = check_panel_arrays(y, X)
        if X.shape[2] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[2]} regressors, model was fitted with {self.n_features_in_}")
        return PanelData(y, X).regressors() @ self.coef_


class PanelTransformer(TransformerMixin, BaseEstimator):
    """Sweep out individual effects from a wide (n_samples, n_periods) array.

    Parameters
    ----------
    method : {"fod", "fd", "equivalent-fd"}, default="fod"
        ``"equivalent-fd"`` is the orthonormalized first-difference transform,
        equal to forward orthogonal deviations up to row signs.
    """

    def __init__(self, method="fod"):
        self.method = method

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim not in (2, 3):
            raise ValueError(f"X must be (n_samples, n_periods[, n_features]), got shape {X.shape}")
        T = X.shape[1]
        if self.method == "fod":
            M = fod_matrix(T)
        elif self.method == "fd":
            M = first_difference_matrix(T)
        elif self.method == "equivalent-fd":
            M = equivalent_transform(first_difference_matrix(T))
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.matrix_ = M.entries
        self.n_periods_ = T
        return self

    def transform(self, X):
        check_is_fitted(self, "matrix_")
        X = np.asarray(X, dtype=float)
        if X.ndim not in (2, 3) or X.shape[1] != self.n_periods_:
            raise ValueError(f"expected {self.n_periods_} periods along axis 1, got shape {X.shape}")
        return np.moveaxis(np.tensordot(self.matrix_, X, axes=(1, 1)), 0, 1)
