"""One-step, two-step and system GMM for transformed dynamic panels.

All estimators share one sandwich::

    beta = [X'Z W Z'X]^{-1} X'Z W Z'y

with sums over individuals. ``W`` is never formed before solving: the
matrix whose inverse it is (the *weighting target*) is Cholesky-factored and
the sandwich is evaluated with triangular solves. A singular target is an
error, never silently pseudo-inverted.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import (
    FactorizationError,
    GMMError,
    IdentificationError,
    InvalidDimensionError,
    SingularWeightingError,
)
from .instruments import (
    InstrumentMatrix,
    PanelInstruments,
    get_scheme,
    nesting_check,
    realize,
    realize_system,
    transfer_matrix,
)
from .panel import PanelData
from .transforms import (
    as_transform,
    first_difference_matrix,
    fod_matrix,
    system_extend,
    upper_cholesky,
)

__all__ = [
    "GmmEstimate",
    "EquivalenceReport",
    "gmm_kernel",
    "one_step",
    "two_step",
    "system_one_step",
    "system_two_step",
    "estimate",
    "equivalence_report",
    "relative_difference",
    "resolve_transform",
]

NEAR_SINGULAR_COND = 1e12
EQUIVALENCE_TOL = 1e-8

_KIND_LABELS = {"difference": "FD", "fod": "FOD", "custom": "custom"}


@dataclass(eq=False)
class GmmEstimate:
    """Result of one GMM fit.

    ``beta`` is ordered ``(delta, alpha_1, ..., alpha_P)``. ``weighting`` is
    the realized weighting matrix (inverse of ``weighting_target``).
    """

    beta: np.ndarray
    weighting: np.ndarray
    weighting_target: np.ndarray
    moments: int
    step: str
    transform_kind: str
    condition_number: float
    n_individuals: int
    scheme: str = "custom"
    initial_beta: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)

    @property
    def delta(self):
        return float(self.beta[0])

    @property
    def alpha(self):
        return self.beta[1:]

    def to_record(self):
        """Flat, JSON-serializable summary of the estimate."""
        rec = {
            "transform_kind": self.transform_kind,
            "step": self.step,
            "scheme": self.scheme,
            "moments": int(self.moments),
            "n_individuals": int(self.n_individuals),
            "condition_number": float(self.condition_number),
            "beta": [float(b) for b in self.beta],
        }
        if self.initial_beta is not None:
            rec["initial_beta"] = [float(b) for b in self.initial_beta]
        if self.warnings:
            rec["warnings"] = list(self.warnings)
        return rec


def resolve_transform(transform, T):
    """Turn ``"fd"``/``"fod"`` or a matrix into a non-system TransformMatrix with T columns."""
    if isinstance(transform, str):
        key = transform.lower()
        if key in ("fd", "difference", "first-difference"):
            return first_difference_matrix(T)
        if key in ("fod", "forward-orthogonal-deviations"):
            return fod_matrix(T)
        raise ValueError(f"unknown transform {transform!r}; expected 'fd' or 'fod'")
    M = as_transform(transform)
    if M.kind == "system-extended":
        raise InvalidDimensionError("pass the base transform; system extension is applied internally")
    if M.cols != T:
        raise InvalidDimensionError(f"transform has {M.cols} columns but the panel has T = {T}")
    return M


def _kind_label(M, system):
    label = _KIND_LABELS[M.kind]
    if system and label != "custom":
        label += "-SYS"
    return label


class _Problem:
    """Transformed data and instruments for one (panel, transform, scheme) triple."""

    def __init__(self, panel, transform, scheme, system):
        if not isinstance(panel, PanelData):
            raise TypeError(f"expected PanelData, got {type(panel).__name__}")
        scheme = get_scheme(scheme)
        base = resolve_transform(transform, panel.T)
        y_lev = panel.outcome()
        X_lev = panel.regressors()
        if system:
            M = system_extend(base, panel.T)
            y_lev = np.concatenate([y_lev, y_lev], axis=1)
            X_lev = np.concatenate([X_lev, X_lev], axis=1)
            Z = realize_system(panel, scheme)
        else:
            M = base
            Z = realize(panel, scheme)
        if Z.n_blocks != M.rows:
            raise InvalidDimensionError(
                f"transform has {M.rows} rows but the scheme produced {Z.n_blocks} instrument blocks"
            )
        self.panel = panel
        self.scheme = scheme
        self.M = M.entries
        self.kind = _kind_label(base, system)
        self.y_lev = y_lev
        self.X_lev = X_lev
        self.Z = Z
        yt = y_lev @ self.M.T
        Xt = np.einsum("rc,nck->nrk", self.M, X_lev)
        self.ZX = Z.moments(Xt).sum(axis=0)
        self.Zy = Z.moments(yt).sum(axis=0)

    def one_step_target(self):
        return self.Z.weighted_gram(self.M @ self.M.T)

    def two_step_target(self, beta):
        resid = self.y_lev - self.X_lev @ beta
        g = self.Z.moments(resid @ self.M.T)
        return g.T @ g

    def fit(self, target, step, initial_beta=None):
        beta, W, cond = _solve_sandwich(self.ZX, self.Zy, target, self.panel.N)
        notes = []
        if step == "two" and cond > NEAR_SINGULAR_COND:
            notes.append(f"weighting target is near-singular (condition number {cond:.3g})")
        return GmmEstimate(
            beta=beta,
            weighting=W,
            weighting_target=target,
            moments=self.Z.n_moments,
            step=step,
            transform_kind=self.kind,
            condition_number=cond,
            n_individuals=self.panel.N,
            scheme=self.scheme.name,
            initial_beta=None if initial_beta is None else np.array(initial_beta, dtype=float),
            warnings=notes,
        )


def _factor_target(target, n_individuals):
    try:
        return upper_cholesky(target)
    except FactorizationError as exc:
        raise SingularWeightingError(
            "weighting target is singular; the optimal weighting matrix cannot be computed",
            n_moments=target.shape[0],
            n_individuals=n_individuals,
            pivot_index=exc.pivot_index,
        ) from exc


def _solve_normal(H, b):
    try:
        L = upper_cholesky(H)
    except FactorizationError as exc:
        raise IdentificationError(
            "X'Z W Z'X is singular; coefficients are not identified",
            condition_number=float(np.linalg.cond(H)),
        ) from exc
    return L.solve(b)


def _solve_sandwich(ZX, Zy, target, n_individuals):
    target = 0.5 * (target + target.T)
    cond = float(np.linalg.cond(target))
    U = _factor_target(target, n_individuals)
    # A = U^{-T} Z'X so that A'A = X'Z target^{-1} Z'X
    A = solve_triangular(U.entries, ZX, trans="T")
    a = solve_triangular(U.entries, Zy, trans="T")
    beta = _solve_normal(A.T @ A, A.T @ a)
    W = U.solve(np.eye(target.shape[0]))
    return beta, 0.5 * (W + W.T), cond


def _stack_instruments(Z, n, R):
    if isinstance(Z, PanelInstruments):
        return Z.dense()
    if isinstance(Z, InstrumentMatrix):
        Z = [Z]
    if isinstance(Z, (list, tuple)):
        Z = np.array([np.asarray(z, dtype=float) for z in Z])
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 2 and n == 1:
        Z = Z[None]
    if Z.ndim != 3 or Z.shape[:2] != (n, R):
        raise InvalidDimensionError(f"instruments must have shape ({n}, {R}, m), got {Z.shape}")
    return Z


def gmm_kernel(Xt, yt, Z, W):
    """Evaluate ``[sum X'Z W sum Z'X]^{-1} sum X'Z W sum Z'y``.

    Parameters
    ----------
    Xt : array-like of shape (N, R, K)
        Transformed regressors, one matrix per individual.
    yt : array-like of shape (N, R)
        Transformed outcomes.
    Z : PanelInstruments, list of InstrumentMatrix, or array of shape (N, R, m)
    W : array-like of shape (m, m)
        Symmetric positive-definite weighting matrix.
    """
    Xt = np.asarray(Xt, dtype=float)
    yt = np.asarray(yt, dtype=float)
    if Xt.ndim == 2:
        Xt = Xt[None]
        yt = yt[None]
    n, R, _ = Xt.shape
    if yt.shape != (n, R):
        raise InvalidDimensionError(f"yt must have shape {(n, R)}, got {yt.shape}")
    Zd = _stack_instruments(Z, n, R)
    W = np.asarray(W, dtype=float)
    m = Zd.shape[2]
    if W.shape != (m, m):
        raise InvalidDimensionError(f"W must be {m} x {m}, got {W.shape}")
    ZX = np.einsum("nrm,nrk->mk", Zd, Xt)
    Zy = np.einsum("nrm,nr->m", Zd, yt)
    return _solve_normal(ZX.T @ W @ ZX, ZX.T @ W @ Zy)


def _initial_beta(initial):
    if isinstance(initial, GmmEstimate):
        return initial.beta
    return np.asarray(initial, dtype=float)


def one_step(panel, transform, scheme):
    """One-step GMM with weighting ``(sum Z_i' K K' Z_i)^{-1}``.

    For the FOD transform ``K K' = I`` and the target reduces to ``sum Z_i' Z_i``.
    """
    prob = _Problem(panel, transform, scheme, system=False)
    return prob.fit(prob.one_step_target(), "one")


def two_step(panel, transform, scheme, initial=None):
    """Two-step GMM with weighting ``(sum Z_i' e~_i e~_i' Z_i)^{-1}``.

    Residuals ``e_i = y_i - X_i beta0`` are formed in levels and then
    transformed. ``initial`` (an estimate or a coefficient vector) defaults
    to the one-step estimate with the same transform.
    """
    prob = _Problem(panel, transform, scheme, system=False)
    if initial is None:
        initial = prob.fit(prob.one_step_target(), "one")
    beta0 = _initial_beta(initial)
    return prob.fit(prob.two_step_target(beta0), "two", initial_beta=beta0)


def system_one_step(panel, base_transform, scheme):
    """System GMM seeded with weighting ``(sum Z+' diag(K K', I) Z+)^{-1}``."""
    prob = _Problem(panel, base_transform, scheme, system=True)
    return prob.fit(prob.one_step_target(), "one")


def system_two_step(panel, base_transform, scheme, initial=None):
    """Two-step system GMM on ``diag(K, I)``-transformed stacked levels.

    ``initial`` defaults to the non-system one-step estimate with the same
    base transform; see :func:`system_one_step` for the system-level seed.
    """
    prob = _Problem(panel, base_transform, scheme, system=True)
    if initial is None:
        initial = one_step(panel, base_transform, scheme)
    beta0 = _initial_beta(initial)
    return prob.fit(prob.two_step_target(beta0), "two", initial_beta=beta0)


def estimate(panel, transform="fd", scheme="recent-lags", step=2, system=False, initial=None):
    """Dispatch to one of the four estimator entry points."""
    if step not in (1, 2):
        raise ValueError(f"step must be 1 or 2, got {step!r}")
    if system:
        if step == 1:
            return system_one_step(panel, transform, scheme)
        return system_two_step(panel, transform, scheme, initial)
    if step == 1:
        return one_step(panel, transform, scheme)
    return two_step(panel, transform, scheme, initial)


def relative_difference(a, b):
    """``||a - b|| / ||b||`` (Euclidean norms)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b)
    if denom == 0.0:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / denom)


@dataclass(eq=False)
class EquivalenceReport:
    fd: Optional[GmmEstimate]
    fod: Optional[GmmEstimate]
    max_rel_diff: float
    nested: bool
    witness: Optional[tuple]
    transfer_residual: float
    initial_beta: Optional[np.ndarray]
    system: bool = False
    errors: dict = field(default_factory=dict)

    @property
    def consistent(self):
        """Nested iff the two-step estimates agree to ``EQUIVALENCE_TOL``."""
        if self.fd is None or self.fod is None:
            return True
        return self.nested == (self.max_rel_diff < EQUIVALENCE_TOL)


def equivalence_report(panel, scheme, system=False, initial=None, tol=EQUIVALENCE_TOL):
    """Compare two-step FD and FOD GMM computed from one shared initial estimate.

    The shared initial estimate defaults to FD one-step. Estimation failures on either side are recorded in
    ``errors`` and the other side is still reported.
    """
    scheme = get_scheme(scheme)
    errors = {}
    if initial is None:
        try:
            initial = one_step(panel, "fd", scheme)
        except GMMError as exc:
            errors["initial"] = exc
    beta0 = None if initial is None else _initial_beta(initial)
    est = {}
    for name in ("fd", "fod"):
        est[name] = None
        if beta0 is None:
            continue
        try:
            fn = system_two_step if system else two_step
            est[name] = fn(panel, name, scheme, initial=beta0)
        except GMMError as exc:
            errors[name] = exc
    if est["fd"] is not None and est["fod"] is not None:
        diff = relative_difference(est["fod"].beta, est["fd"].beta)
    else:
        diff = float("nan")

    Z = realize(panel, scheme)
    nest = nesting_check(Z, panel, tol=tol)
    D = first_difference_matrix(panel.T).entries
    inv_gram = upper_cholesky(D @ D.T).solve(np.eye(panel.T - 1))
    U = upper_cholesky(0.5 * (inv_gram + inv_gram.T)).entries
    transfer = transfer_matrix(Z, U, tol=tol)
    return EquivalenceReport(
        fd=est["fd"],
        fod=est["fod"],
        max_rel_diff=diff,
        nested=nest.nested,
        witness=nest.witness,
        transfer_residual=transfer.residual,
        initial_beta=beta0,
        system=system,
        errors=errors,
    )
