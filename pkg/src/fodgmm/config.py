"""Experiment configuration files.

The format is flat ``key = value`` lines; list-valued keys take
comma-separated values and ``#`` starts a comment::

    # baseline design, two autoregressive values for x
    T = 10
    sigma_eta = 1
    delta = 0.5
    rho = 0.3, 0.8
    error_model = conditional-hetero
    estimators = FD, FOD, FD-SYS:2
    replications = 2000
    master_seed = 20190701
"""

import itertools
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ConfigError
from .instruments import get_scheme
from .simulation import ERROR_MODELS, DesignPoint, EstimatorSpec
from .validation import check_random_seed

__all__ = ["ExperimentConfig", "parse_config", "load_config"]

_LIST_KEYS = {
    "T": int,
    "delta": float,
    "rho": float,
    "sigma_eta": float,
    "error_model": str,
    "estimators": str,
}
_SCALAR_KEYS = {
    "N": int,
    "alpha": float,
    "replications": int,
    "master_seed": int,
    "scheme": str,
    "out": str,
    "threads": int,
}


@dataclass
class ExperimentConfig:
    T: list = field(default_factory=lambda: [10])
    delta: list = field(default_factory=lambda: [0.5])
    rho: list = field(default_factory=lambda: [0.3])
    sigma_eta: list = field(default_factory=lambda: [1.0])
    error_model: list = field(default_factory=lambda: ["conditional-hetero"])
    estimators: list = field(default_factory=lambda: [EstimatorSpec("fd"), EstimatorSpec("fod")])
    N: int = 200
    alpha: float = 0.5
    replications: int = 100
    master_seed: int = 0
    scheme: str = "recent-lags"
    out: str = "results"
    threads: int = 1

    def designs(self):
        """Grid cells ordered by error model, T, sigma_eta, delta, rho."""
        for em, T, se, d, r in itertools.product(
            self.error_model, self.T, self.sigma_eta, self.delta, self.rho
        ):
            yield DesignPoint(
                N=self.N,
                T=T,
                delta=d,
                alpha=self.alpha,
                rho=r,
                sigma_eta=se,
                error_model=em,
                replications=self.replications,
                master_seed=self.master_seed,
            )


def _convert(kind, text, key, lineno):
    try:
        if kind is int:
            value = int(text, 0) if text.lower().startswith("0x") else int(text)
        elif kind is float:
            value = float(text)
        else:
            value = text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}", lineno) from None
    if value == "":
        raise ConfigError(f"{key}: empty value", lineno)
    return value


def parse_config(text):
    """Parse configuration text into an :class:`ExperimentConfig`."""
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        rest = rest.strip()
        if key in _LIST_KEYS:
            items = [item.strip() for item in rest.split(",")]
            values[key] = [_convert(_LIST_KEYS[key], item, key, lineno) for item in items]
        elif key in _SCALAR_KEYS:
            values[key] = _convert(_SCALAR_KEYS[key], rest, key, lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
        lines[key] = lineno

    scheme = values.get("scheme", "recent-lags")
    try:
        get_scheme(scheme)
    except ValueError as exc:
        raise ConfigError(str(exc), lines.get("scheme")) from None
    if "estimators" in values:
        try:
            values["estimators"] = [EstimatorSpec.parse(e, scheme) for e in values["estimators"]]
        except ValueError as exc:
            raise ConfigError(str(exc), lines["estimators"]) from None
    else:
        values["estimators"] = [EstimatorSpec("fd", scheme=scheme), EstimatorSpec("fod", scheme=scheme)]
    for em in values.get("error_model", []):
        if em not in ERROR_MODELS:
            raise ConfigError(f"error_model must be one of {ERROR_MODELS}, got {em!r}", lines["error_model"])
    if "master_seed" in values:
        try:
            check_random_seed(values["master_seed"])
        except ValueError as exc:
            raise ConfigError(str(exc), lines["master_seed"]) from None
    for key in ("replications", "threads", "N"):
        if key in values and values[key] < 1:
            raise ConfigError(f"{key} must be >= 1", lines[key])

    config = ExperimentConfig(**values)
    try:
        list(config.designs())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid design grid: {exc}") from None
    return config


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))
