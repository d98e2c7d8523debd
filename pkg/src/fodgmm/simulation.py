"""Monte Carlo data-generating process and replication batteries.

The process runs from period -50 and discards everything before period 0::

    x_it = rho x_{i,t-1} - 0.3 y_{i,t-1} + 0.5 eta_i + xi_it
    y_it = delta y_{i,t-1} + alpha x_it + eta_i + v_it

with ``y_{i,-50} = 0`` and ``x_{i,-50} = 5 + 10 xi_{i,-50}``.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .estimators import estimate
from .exceptions import EmptySummaryError, GMMError, UndefinedRatioError
from .panel import PanelData
from .validation import check_period_count, check_random_seed

__all__ = [
    "DesignPoint",
    "Shocks",
    "EstimatorSpec",
    "McSummary",
    "ERROR_MODELS",
    "BURN_IN",
    "uniform_unit_variance",
    "replication_seed",
    "draw_shocks",
    "simulate_panel",
    "generate_panel",
    "run_battery",
    "summarize",
    "summarize_battery",
    "percent_reduction",
]

ERROR_MODELS = ("conditional-hetero", "time-series-hetero")
BURN_IN = 50
_HALF_WIDTH = np.sqrt(3.0)


@dataclass(frozen=True)
class DesignPoint:
    N: int = 200
    T: int = 10
    delta: float = 0.5
    alpha: float = 0.5
    rho: float = 0.3
    sigma_eta: float = 1.0
    error_model: str = "conditional-hetero"
    replications: int = 1
    master_seed: int = 0

    def __post_init__(self):
        check_period_count(self.N, minimum=1, name="N")
        check_period_count(self.T, minimum=2, name="T")
        for name in ("delta", "alpha", "rho", "sigma_eta"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.sigma_eta < 0:
            raise ValueError("sigma_eta must be non-negative")
        if self.error_model not in ERROR_MODELS:
            raise ValueError(f"error_model must be one of {ERROR_MODELS}, got {self.error_model!r}")
        check_period_count(self.replications, minimum=1, name="replications")
        check_random_seed(self.master_seed)

    @property
    def truth(self):
        return (self.delta, self.alpha)


@dataclass(frozen=True, eq=False)
class Shocks:
    """Primitive random draws of one replication.

    ``xi``, ``eps`` have shape (N, T + 50) and ``lam`` shape (T + 50,),
    covering periods -49..T.
    """

    zeta: np.ndarray
    xi_start: np.ndarray
    xi: np.ndarray
    eps: np.ndarray
    lam: np.ndarray


def uniform_unit_variance(rng, size=None):
    """Uniform draws on [-sqrt(3), sqrt(3)], which have mean 0 and variance 1."""
    return rng.uniform(-_HALF_WIDTH, _HALF_WIDTH, size)


def replication_seed(master_seed, rep):
    """Counter-based seed of replication ``rep``; independent of scheduling."""
    return np.random.SeedSequence(check_random_seed(master_seed), spawn_key=(int(rep),))


def draw_shocks(design, rng):
    n_sim = design.T + BURN_IN
    N = design.N
    return Shocks(
        zeta=rng.standard_normal(N),
        xi_start=uniform_unit_variance(rng, N),
        xi=uniform_unit_variance(rng, (N, n_sim)),
        eps=rng.standard_normal((N, n_sim)),
        lam=uniform_unit_variance(rng, n_sim),
    )


def simulate_panel(design, shocks):
    """Run the recursion on given shocks and keep periods 0..T."""
    n_sim = design.T + BURN_IN
    eta = design.sigma_eta * shocks.zeta
    y_prev = np.zeros(design.N)
    x_prev = 5.0 + 10.0 * shocks.xi_start
    y = np.empty((design.N, n_sim))
    x = np.empty((design.N, n_sim))
    for k in range(n_sim):
        x_t = design.rho * x_prev - 0.3 * y_prev + 0.5 * eta + shocks.xi[:, k]
        if design.error_model == "conditional-hetero":
            v_t = x_t * shocks.eps[:, k]
        else:
            v_t = shocks.lam[k] * shocks.eps[:, k]
        y_t = design.delta * y_prev + design.alpha * x_t + eta + v_t
        y[:, k] = y_t
        x[:, k] = x_t
        y_prev, x_prev = y_t, x_t
    keep = slice(BURN_IN - 1, n_sim)  # column k holds period k - 49
    return PanelData(y[:, keep], x[:, keep], truth=design.truth)


def generate_panel(design, rep_seed):
    """Simulate one panel; identical ``(design, rep_seed)`` gives identical panels."""
    rng = np.random.default_rng(rep_seed)
    return simulate_panel(design, draw_shocks(design, rng))


@dataclass(frozen=True)
class EstimatorSpec:
    transform: str = "fd"
    system: bool = False
    step: int = 2
    scheme: str = "recent-lags"

    @property
    def label(self):
        kind = self.transform.upper() + ("-SYS" if self.system else "")
        return f"{kind}:{self.step}"

    @classmethod
    def parse(cls, text, scheme="recent-lags"):
        """Parse labels such as ``FD``, ``FOD-SYS`` or ``FD:1`` (default step 2)."""
        body, _, step = text.strip().partition(":")
        parts = body.strip().upper().split("-")
        system = parts[-1] == "SYS"
        if system:
            parts = parts[:-1]
        if len(parts) != 1 or parts[0] not in ("FD", "FOD"):
            raise ValueError(f"unknown estimator {text!r}")
        step = int(step) if step else 2
        if step not in (1, 2):
            raise ValueError(f"estimator step must be 1 or 2 in {text!r}")
        return cls(parts[0].lower(), system, step, scheme)

    def run(self, panel):
        return estimate(panel, self.transform, self.scheme, self.step, self.system)


def _panel_digest(panel):
    h = hashlib.sha1(panel.y.tobytes())
    h.update(panel.x.tobytes())
    return h.hexdigest()


def _run_replication(design, specs, master_seed, rep):
    panel = generate_panel(design, replication_seed(master_seed, rep))
    digest = _panel_digest(panel)
    rows = []
    for spec in specs:
        row = {"rep": rep, "estimator": spec.label, "panel_digest": digest, "beta": None, "error": None}
        try:
            row["beta"] = spec.run(panel).beta
        except GMMError as exc:
            row["error"] = exc.code
        rows.append(row)
    return rows


def run_battery(design, estimator_specs, reps=None, master_seed=None, threads=1):
    """Run every estimator on the same panel for each replication.

    Returns a list of row dicts (``rep``, ``estimator``, ``panel_digest``,
    ``beta``, ``error``) ordered by replication, then estimator. Failed fits
    keep their row with ``beta=None`` and the error code.
    """
    reps = design.replications if reps is None else check_period_count(reps, minimum=1, name="reps")
    master_seed = design.master_seed if master_seed is None else check_random_seed(master_seed)
    specs = list(estimator_specs)
    if threads <= 1:
        chunks = [_run_replication(design, specs, master_seed, r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda r: _run_replication(design, specs, master_seed, r), range(reps)))
    return [row for chunk in chunks for row in chunk]


@dataclass(frozen=True, eq=False)
class McSummary:
    bias: np.ndarray
    sd: np.ndarray
    rmse: np.ndarray
    replications: int
    failures: int = 0
    failure_codes: dict = field(default_factory=dict)


def summarize(estimates, truth, failures=0):
    """Bias, standard deviation (divisor n) and rmse of replicated estimates.

    ``None`` entries in ``estimates`` count as failures and are excluded.
    """
    kept = [np.atleast_1d(np.asarray(e, dtype=float)) for e in estimates if e is not None]
    failures += sum(e is None for e in estimates)
    if not kept:
        raise EmptySummaryError("no successful replications to summarize")
    est = np.vstack(kept)
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    err = est - truth
    bias = err.mean(axis=0)
    sd = est.std(axis=0)
    rmse = np.sqrt(np.mean(err**2, axis=0))
    return McSummary(bias, sd, rmse, len(kept), failures)


def summarize_battery(rows, truth):
    """Group battery rows by estimator label.

    Estimators whose replications all failed map to a McSummary-less entry:
    the value is ``None`` and the failure codes are available via
    ``failure_counts``.
    """
    grouped = {}
    codes = {}
    for row in rows:
        grouped.setdefault(row["estimator"], []).append(row["beta"])
        if row["error"] is not None:
            c = codes.setdefault(row["estimator"], {})
            c[row["error"]] = c.get(row["error"], 0) + 1
    out = {}
    for label, betas in grouped.items():
        try:
            s = summarize(betas, truth)
            out[label] = replace(s, failure_codes=codes.get(label, {}))
        except EmptySummaryError:
            out[label] = None
    return out, codes


def percent_reduction(baseline, alternative):
    """``100 (baseline - alternative) / baseline``."""
    if baseline == 0:
        raise UndefinedRatioError("percent reduction is undefined for a zero baseline")
    return 100.0 * (baseline - alternative) / baseline
