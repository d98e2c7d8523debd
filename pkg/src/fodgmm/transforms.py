"""Transformation matrices that sweep out time-invariant effects.

Every non-system transform ``M`` here satisfies ``M @ ones == 0``. The
equivalent orthonormal transform of an arbitrary ``K`` is ``U @ K`` where
``U`` is the upper-triangular Cholesky factor of ``inv(K @ K.T)`` in the
convention ``inv(K @ K.T) == U.T @ U``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .exceptions import FactorizationError, InvalidDimensionError
from .validation import check_period_count

__all__ = [
    "TransformMatrix",
    "CholeskyFactor",
    "first_difference_matrix",
    "fod_matrix",
    "upper_cholesky",
    "equivalent_transform",
    "system_extend",
    "apply_transform",
    "as_transform",
]

KINDS = ("difference", "fod", "custom", "system-extended")

# pivots at or below this fraction of the largest diagonal entry are rejected
PIVOT_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransformMatrix:
    """A dense transformation matrix with a label describing its origin.

    ``base_kind`` is only meaningful for system-extended matrices and records
    the kind of the top-left block.
    """

    entries: np.ndarray
    kind: str = "custom"
    base_kind: str = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.size == 0:
            raise InvalidDimensionError(f"transform must be a non-empty matrix, got shape {entries.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __matmul__(self, other):
        return self.entries @ np.asarray(other)

    def __repr__(self):
        return f"TransformMatrix(kind={self.kind!r}, shape={self.shape})"


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Upper-triangular ``U`` with positive diagonal and ``U.T @ U == A``."""

    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def solve(self, b):
        """Solve ``A @ z = b`` using the stored factor."""
        return cho_solve((self.entries, False), b)


def as_transform(M):
    if isinstance(M, TransformMatrix):
        return M
    return TransformMatrix(np.asarray(M, dtype=float), kind="custom")


def first_difference_matrix(T):
    """(T-1) x T matrix mapping levels to successive differences."""
    T = check_period_count(T)
    D = np.zeros((T - 1, T))
    idx = np.arange(T - 1)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0
    return TransformMatrix(D, kind="difference")


def fod_matrix(T):
    """Forward orthogonal deviations matrix of shape (T-1) x T.

    Row ``t`` (1-based) is ``sqrt((T-t)/(T-t+1))`` times the vector with 1 in
    position ``t`` and ``-1/(T-t)`` in every later position.
    """
    T = check_period_count(T)
    F = np.zeros((T - 1, T))
    for r in range(T - 1):
        remaining = T - 1 - r  # observations after this one
        F[r, r] = 1.0
        F[r, r + 1:] = -1.0 / remaining
        F[r] *= np.sqrt(remaining / (remaining + 1.0))
    return TransformMatrix(F, kind="fod")


def upper_cholesky(A, symmetry_rtol=1e-10):
    """Factor a symmetric positive-definite matrix as ``A = U.T @ U``.

    Parameters
    ----------
    A : array-like of shape (n, n)
    symmetry_rtol : float
        Maximum allowed ``max|A - A.T| / max|A|``.

    Returns
    -------
    CholeskyFactor

    Raises
    ------
    FactorizationError
        If a pivot is not larger than ``1e-12 * max(diag(A))``. The error
        carries the 0-based ``pivot_index``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidDimensionError(f"expected a non-empty square matrix, got shape {A.shape}")
    scale = np.max(np.abs(A))
    if scale > 0 and np.max(np.abs(A - A.T)) > symmetry_rtol * scale:
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    threshold = PIVOT_RTOL * max(np.max(np.diag(A)), 0.0)
    U = np.zeros_like(A)
    for j in range(n):
        col = U[:j, j]
        pivot = A[j, j] - col @ col
        if not pivot > threshold or pivot <= 0.0:
            raise FactorizationError(
                f"matrix is not positive definite: pivot {j} is {pivot:.3g}", pivot_index=j
            )
        d = np.sqrt(pivot)
        U[j, j] = d
        if j + 1 < n:
            U[j, j + 1:] = (A[j, j + 1:] - col @ U[:j, j + 1:]) / d
    return CholeskyFactor(U)


def equivalent_transform(K):
    """Return ``F = U @ K`` with ``U`` the upper Cholesky factor of ``inv(K K')``.

    The result has orthonormal rows and still annihilates constants. For
    ``K = first_difference_matrix(T)`` it equals ``fod_matrix(T)`` up to a
    sign on every row, which leaves all GMM estimates unchanged.
    """
    K = as_transform(K)
    gram = K.entries @ K.entries.T
    L = upper_cholesky(gram)
    # inv(K K') without forming the inverse explicitly
    inv_gram = L.solve(np.eye(K.rows))
    inv_gram = 0.5 * (inv_gram + inv_gram.T)
    U = upper_cholesky(inv_gram).entries
    kind = "fod" if K.kind == "fod" else "custom"
    return TransformMatrix(U @ K.entries, kind=kind)


def system_extend(M, T):
    """Block-diagonal ``diag(M, I_T)`` used by system GMM."""
    M = as_transform(M)
    T = check_period_count(T, minimum=1)
    if M.kind == "system-extended":
        raise InvalidDimensionError("transform is already system-extended")
    if M.cols != T:
        raise InvalidDimensionError(f"transform has {M.cols} columns but T = {T}")
    out = np.zeros((M.rows + T, 2 * T))
    out[:M.rows, :T] = M.entries
    out[M.rows:, T:] = np.eye(T)
    return TransformMatrix(out, kind="system-extended", base_kind=M.kind)


def apply_transform(M, data):
    """Premultiply ``data`` (rows = periods) by the transform."""
    M = as_transform(M)
    data = np.asarray(data, dtype=float)
    if data.ndim == 0 or data.shape[0] != M.cols:
        raise InvalidDimensionError(
            f"data has {data.shape[0] if data.ndim else 0} rows but transform expects {M.cols}"
        )
    return np.tensordot(M.entries, data, axes=(1, 0))
