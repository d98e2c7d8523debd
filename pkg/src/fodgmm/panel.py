"""Balanced panel container."""

from dataclasses import dataclass

import numpy as np

from .validation import check_panel_arrays


@dataclass(frozen=True, eq=False)
class PanelData:
    """Levels of a balanced dynamic panel observed in periods ``0..T``.

    Attributes
    ----------
    y : ndarray of shape (N, T+1)
    x : ndarray of shape (N, T+1, P)
    truth : tuple or None
        ``(delta, alpha)`` used to simulate the panel, if known.
    """

    y: np.ndarray
    x: np.ndarray
    truth: tuple = None

    def __post_init__(self):
        y, x = check_panel_arrays(self.y, self.x)
        # own C-ordered copies: results must not depend on the caller's layout
        y = np.array(y, dtype=float, order="C")
        x = np.array(x, dtype=float, order="C")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def N(self):
        return self.y.shape[0]

    @property
    def T(self):
        return self.y.shape[1] - 1

    @property
    def P(self):
        return self.x.shape[2]

    @property
    def true_beta(self):
        if self.truth is None:
            return None
        delta, alpha = self.truth
        return np.concatenate([[delta], np.atleast_1d(alpha)]).astype(float)

    def outcome(self):
        """``(y_i1, ..., y_iT)`` for every individual, shape (N, T)."""
        return self.y[:, 1:]

    def regressors(self):
        """Rows ``(y_{i,t-1}, x_it')`` for t = 1..T, shape (N, T, 1+P)."""
        return np.concatenate([self.y[:, :-1, None], self.x[:, 1:, :]], axis=2)

    def subset(self, index):
        idx = np.atleast_1d(np.arange(self.N)[index])
        return PanelData(self.y[idx], self.x[idx], self.truth)

    def __repr__(self):
        return f"PanelData(N={self.N}, T={self.T}, P={self.P})"
