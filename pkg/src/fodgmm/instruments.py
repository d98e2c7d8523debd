"""Instrument schemes, block-diagonal instrument matrices and nesting tests.

A scheme maps a panel and a block index ``t`` (1-based, one block per
transformed equation) to the instruments ``z_it`` of every individual at
once. Realized instruments are kept as a list of per-block ``(N, k_t)``
arrays; the dense block-diagonal ``Z_i`` is only materialized on request.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    DegenerateDataWarning,
    InvalidDimensionError,
    InvalidIndexError,
    InvalidInstrumentError,
)
from .panel import PanelData

__all__ = [
    "InstrumentScheme",
    "InstrumentMatrix",
    "SystemInstrumentMatrix",
    "PanelInstruments",
    "NestingResult",
    "TransferResult",
    "ALL_LAGS",
    "RECENT_LAGS",
    "get_scheme",
    "build_block_diagonal",
    "recent_lags",
    "all_lags",
    "realize",
    "level_instruments",
    "system_instruments",
    "realize_system",
    "nesting_check",
    "transfer_matrix",
]

DEFAULT_TOL = 1e-8
DEGENERATE_COND = 1e10


def _check_block(panel, t):
    R = panel.T - 1
    if not 1 <= t <= R:
        raise InvalidIndexError(f"block index must lie in 1..{R}, got {t}")


def _recent_block(panel, t):
    _check_block(panel, t)
    y, x = panel.y, panel.x
    if t == 1:
        return np.column_stack([y[:, 0], x[:, 0, :], x[:, 1, :]])
    return np.column_stack(
        [y[:, t - 2], y[:, t - 1], x[:, t - 2, :], x[:, t - 1, :], x[:, t, :]]
    )


def _all_lags_block(panel, t):
    _check_block(panel, t)
    n = panel.N
    return np.concatenate([panel.y[:, :t], panel.x[:, : t + 1, :].reshape(n, -1)], axis=1)


@dataclass(frozen=True)
class InstrumentScheme:
    """Named rule producing the instruments of block ``t`` for all individuals.

    ``block(panel, t)`` must return an array of shape ``(panel.N, k_t)`` where
    ``k_t`` depends only on ``t``.
    """

    name: str
    block: Callable[[PanelData, int], np.ndarray]

    def __call__(self, panel, i, t):
        return np.asarray(self.block(panel, t), dtype=float)[i]

    @classmethod
    def from_individual(cls, func, name="custom"):
        """Wrap a per-individual builder ``func(panel, i, t) -> vector``."""

        def block(panel, t):
            return np.array([np.atleast_1d(func(panel, i, t)) for i in range(panel.N)], dtype=float)

        return cls(name, block)


RECENT_LAGS = InstrumentScheme("recent-lags", _recent_block)
ALL_LAGS = InstrumentScheme("all-lags", _all_lags_block)
_SCHEMES = {s.name: s for s in (RECENT_LAGS, ALL_LAGS)}


def get_scheme(scheme):
    if isinstance(scheme, InstrumentScheme):
        return scheme
    try:
        return _SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown instrument scheme {scheme!r}; expected one of {sorted(_SCHEMES)}") from None


def recent_lags(panel, i, t):
    """Recent-lags instruments of individual ``i`` for block ``t``.

    ``(y_i0, x_i0, x_i1)`` at ``t == 1`` and
    ``(y_{i,t-2}, y_{i,t-1}, x_{i,t-2}, x_{i,t-1}, x_it)`` afterwards.
    """
    return _recent_block(panel, t)[i]


def all_lags(panel, i, t):
    """All available lags: ``(y_i0..y_{i,t-1}, x_i0..x_it)``."""
    return _all_lags_block(panel, t)[i]


@dataclass(frozen=True, eq=False)
class InstrumentMatrix:
    """Block-diagonal instrument matrix of one individual."""

    blocks: tuple

    @property
    def block_sizes(self):
        return tuple(len(b) for b in self.blocks)

    @property
    def total_moments(self):
        return sum(self.block_sizes)

    @property
    def matrix(self):
        R = len(self.blocks)
        out = np.zeros((R, self.total_moments))
        col = 0
        for t, b in enumerate(self.blocks):
            out[t, col:col + len(b)] = b
            col += len(b)
        return out

    def __array__(self, dtype=None, copy=None):
        m = self.matrix
        return m if dtype is None else m.astype(dtype)


def build_block_diagonal(blocks):
    """Lay out instrument vectors ``z_1 .. z_R`` block-diagonally."""
    blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        raise InvalidInstrumentError("at least one instrument block is required")
    for t, b in enumerate(blocks, start=1):
        if b.ndim != 1 or b.size == 0:
            raise InvalidInstrumentError(f"instrument block {t} is empty or not a vector")
    return InstrumentMatrix(tuple(blocks))


@dataclass(frozen=True, eq=False)
class SystemInstrumentMatrix:
    diff_part: InstrumentMatrix
    level_part: InstrumentMatrix

    @property
    def combined(self):
        return InstrumentMatrix(self.diff_part.blocks + self.level_part.blocks)

    @property
    def total_moments(self):
        return self.diff_part.total_moments + self.level_part.total_moments


class PanelInstruments:
    """Instruments of all individuals, stored block by block.

    Parameters
    ----------
    blocks : list of ndarray
        Block ``t`` has shape ``(N, k_t)``.
    """

    def __init__(self, blocks, scheme_name="custom"):
        blocks = [np.asarray(b, dtype=float) for b in blocks]
        if not blocks:
            raise InvalidInstrumentError("at least one instrument block is required")
        n = blocks[0].shape[0]
        for t, b in enumerate(blocks, start=1):
            if b.ndim != 2 or b.shape[0] != n:
                raise InvalidInstrumentError(f"block {t} must have shape (N, k_t) with N = {n}, got {b.shape}")
            if b.shape[1] == 0:
                raise InvalidInstrumentError(f"instrument block {t} is empty")
        self.blocks = blocks
        self.scheme_name = scheme_name
        self.block_sizes = tuple(b.shape[1] for b in blocks)
        self.offsets = np.concatenate([[0], np.cumsum(self.block_sizes)])
        # block number of every moment column
        self.column_block = np.repeat(np.arange(len(blocks)), self.block_sizes)

    @property
    def n_individuals(self):
        return self.blocks[0].shape[0]

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def n_moments(self):
        return int(self.offsets[-1])

    def individual(self, i):
        return build_block_diagonal([b[i] for b in self.blocks])

    def dense(self):
        """All ``Z_i`` as an array of shape (N, R, m)."""
        out = np.zeros((self.n_individuals, self.n_blocks, self.n_moments))
        for t, b in enumerate(self.blocks):
            out[:, t, self.offsets[t]:self.offsets[t + 1]] = b
        return out

    def moments(self, v):
        """Per-individual ``Z_i' v_i``.

        ``v`` has shape (N, R) or (N, R, K); the result has shape (N, m) or
        (N, m, K).
        """
        v = np.asarray(v, dtype=float)
        if v.shape[:2] != (self.n_individuals, self.n_blocks):
            raise InvalidDimensionError(
                f"expected leading shape {(self.n_individuals, self.n_blocks)}, got {v.shape[:2]}"
            )
        if v.ndim == 2:
            return np.concatenate([b * v[:, t, None] for t, b in enumerate(self.blocks)], axis=1)
        return np.concatenate(
            [b[:, :, None] * v[:, t, None, :] for t, b in enumerate(self.blocks)], axis=1
        )

    def weighted_gram(self, Lam):
        """``sum_i Z_i' Lam Z_i`` for an R x R matrix ``Lam``."""
        Lam = np.asarray(Lam, dtype=float)
        if Lam.shape != (self.n_blocks, self.n_blocks):
            raise InvalidDimensionError(f"Lam must be {self.n_blocks} x {self.n_blocks}, got {Lam.shape}")
        stacked = np.concatenate(self.blocks, axis=1)
        gram = stacked.T @ stacked
        return gram * Lam[np.ix_(self.column_block, self.column_block)]


def realize(panel, scheme):
    """Evaluate a scheme on every block ``1..T-1`` of the panel."""
    scheme = get_scheme(scheme)
    if panel.T < 2:
        raise InvalidDimensionError(f"need T >= 2, got {panel.T}")
    blocks = []
    for t in range(1, panel.T):
        b = np.asarray(scheme.block(panel, t), dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        blocks.append(b)
    return PanelInstruments(blocks, scheme.name)


def level_instruments(panel):
    """Blocks ``t = 1..T`` of the levels-equation instruments.

    Block 1 is ``x_i1 - x_i0``; block ``t >= 2`` is
    ``(y_{i,t-1} - y_{i,t-2}, x_it - x_{i,t-1})``.
    """
    dy = np.diff(panel.y, axis=1)
    dx = np.diff(panel.x, axis=1)
    blocks = [dx[:, 0, :]]
    for t in range(2, panel.T + 1):
        blocks.append(np.column_stack([dy[:, t - 2], dx[:, t - 1, :]]))
    return blocks


def realize_system(panel, scheme):
    diff = realize(panel, scheme)
    return PanelInstruments(diff.blocks + level_instruments(panel), diff.scheme_name)


def system_instruments(panel, i, scheme):
    """Differenced- and levels-equation instruments of individual ``i``."""
    if panel.T < 2:
        raise InvalidDimensionError(f"need T >= 2, got {panel.T}")
    diff = realize(panel, scheme).individual(i)
    level = build_block_diagonal([b[i] for b in level_instruments(panel)])
    return SystemInstrumentMatrix(diff, level)


@dataclass(frozen=True)
class NestingResult:
    nested: bool
    witness: Optional[tuple]
    max_residual: float
    degenerate: bool = False

    def __bool__(self):
        return self.nested


def _as_instruments(obj, panel=None):
    if isinstance(obj, PanelInstruments):
        return obj
    return realize(panel, obj)


def _relative_residuals(A, B):
    """Column-wise ``||B - A c|| / ||B||`` for the least-squares ``c``."""
    coef, *_ = np.linalg.lstsq(A, B, rcond=None)
    resid = np.linalg.norm(B - A @ coef, axis=0)
    scale = np.linalg.norm(B, axis=0)
    out = np.zeros_like(resid)
    nz = scale > 0
    out[nz] = resid[nz] / scale[nz]
    return out, coef


def _warn_if_degenerate(blocks):
    degenerate = False
    for t, b in enumerate(blocks, start=1):
        if b.shape[0] <= b.shape[1] or np.linalg.cond(b) > DEGENERATE_COND:
            warnings.warn(
                f"stacked instruments of block {t} are rank deficient across individuals; "
                "span tests may be spuriously satisfied",
                DegenerateDataWarning,
                stacklevel=3,
            )
            degenerate = True
    return degenerate


def nesting_check(scheme, panel, tol=DEFAULT_TOL):
    """Test whether every instrument of block ``s`` lies in the span of block ``t >= s``.

    Spans are taken over individuals: column ``c`` of the stacked ``z_is``
    (an N-vector) must be reproducible by least squares from the stacked
    ``z_it`` with relative residual below ``tol``.

    Returns
    -------
    NestingResult
        ``witness`` is the first failing ``(s, t, column)`` (1-based blocks,
        0-based column) scanning ``t`` outermost, or None.
    """
    Z = _as_instruments(scheme, panel)
    degenerate = _warn_if_degenerate(Z.blocks)
    worst = 0.0
    witness = None
    for t in range(Z.n_blocks):
        for s in range(t):
            res, _ = _relative_residuals(Z.blocks[t], Z.blocks[s])
            worst = max(worst, float(res.max()))
            bad = np.flatnonzero(res >= tol)
            if witness is None and bad.size:
                witness = (s + 1, t + 1, int(bad[0]))
    return NestingResult(witness is None, witness, worst, degenerate)


@dataclass(frozen=True, eq=False)
class TransferResult:
    C: np.ndarray
    residual: float
    nonsingular: bool
    success: bool


def transfer_matrix(Z, U, tol=DEFAULT_TOL):
    """Least-squares solution of ``C Z_i' = Z_i' U`` jointly over individuals.

    ``C`` is built block by block: block ``(s, t)`` solves
    ``C_st z_it = U_st z_is`` for all ``i``. The fit succeeds when the
    aggregate relative residual is below ``tol`` and ``C`` is nonsingular
    (smallest singular value above ``tol`` times the largest).
    """
    Z = _as_instruments(Z)
    U = np.asarray(U, dtype=float)
    R = Z.n_blocks
    if U.shape != (R, R):
        raise InvalidDimensionError(f"U must be {R} x {R} to match the instrument blocks, got {U.shape}")
    m = Z.n_moments
    C = np.zeros((m, m))
    resid_sq = 0.0
    target_sq = 0.0
    for t in range(R):
        zt = Z.blocks[t]
        cols = slice(Z.offsets[t], Z.offsets[t + 1])
        for s in range(R):
            rows = slice(Z.offsets[s], Z.offsets[s + 1])
            target = U[s, t] * Z.blocks[s]
            target_sq += float(np.sum(target**2))
            if U[s, t] == 0.0:
                continue
            coef, *_ = np.linalg.lstsq(zt, target, rcond=None)
            C[rows, cols] = coef.T
            resid_sq += float(np.sum((target - zt @ coef) ** 2))
    residual = np.sqrt(resid_sq / target_sq) if target_sq > 0 else 0.0
    sv = np.linalg.svd(C, compute_uv=False)
    nonsingular = bool(sv[-1] > tol * sv[0])
    return TransferResult(C, float(residual), nonsingular, bool(residual < tol and nonsingular))
