"""Grid runner producing the summary and comparison CSV files."""

import csv
import logging
from pathlib import Path

from .simulation import percent_reduction, run_battery, summarize_battery

__all__ = ["SUMMARY_COLUMNS", "COMPARISON_COLUMNS", "run_grid", "write_results", "fmt"]

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["T", "sigma_eta", "delta", "rho", "error_model", "estimator", "coef", "bias", "sd", "rmse", "failures"]
COMPARISON_COLUMNS = [
    "T", "sigma_eta", "delta", "rho", "error_model", "baseline", "alternative", "coef",
    "bias_reduction", "sd_reduction", "rmse_reduction",
]


def fmt(value):
    """Six significant digits, locale independent; empty for missing values."""
    if value is None:
        return ""
    return f"{value:.6g}"


def _coef_names(n):
    if n == 2:
        return ["delta", "alpha"]
    return ["delta"] + [f"alpha{p}" for p in range(1, n)]


def _failure_field(codes):
    if not codes:
        return "0"
    total = sum(codes.values())
    return f"{total}:" + "+".join(sorted(codes))


def _design_fields(design):
    return [str(design.T), fmt(design.sigma_eta), fmt(design.delta), fmt(design.rho), design.error_model]


def _pairs(labels):
    """(baseline, alternative) label pairs: FD vs FOD at equal step and system flag."""
    out = []
    for label in labels:
        kind, step = label.split(":")
        if kind.startswith("FD") and not kind.startswith("FOD"):
            alt = "FOD" + kind[2:] + ":" + step
            if alt in labels:
                out.append((label, alt))
    return out


def run_grid(config, threads=1):
    """Run every design cell; returns (summary_rows, comparison_rows, n_failed_cells)."""
    summary_rows = []
    comparison_rows = []
    failed_cells = 0
    labels = [spec.label for spec in config.estimators]
    for design in config.designs():
        logger.info("running %s", design)
        rows = run_battery(design, config.estimators, threads=threads)
        summaries, codes = summarize_battery(rows, design.truth)
        if codes:
            failed_cells += 1
        n_coef = None
        for s in summaries.values():
            if s is not None:
                n_coef = len(s.bias)
        names = _coef_names(n_coef or 2)
        for label in labels:
            s = summaries[label]
            for j, name in enumerate(names):
                stats = [None, None, None] if s is None else [s.bias[j], s.sd[j], s.rmse[j]]
                summary_rows.append(
                    _design_fields(design) + [label, name] + [fmt(v) for v in stats]
                    + [_failure_field(codes.get(label, {}))]
                )
        for base, alt in _pairs(labels):
            sb, sa = summaries[base], summaries[alt]
            for j, name in enumerate(names):
                red = []
                for attr in ("bias", "sd", "rmse"):
                    if sb is None or sa is None:
                        red.append(None)
                        continue
                    b, a = abs(getattr(sb, attr)[j]), abs(getattr(sa, attr)[j])
                    red.append(percent_reduction(b, a) if b != 0 else None)
                comparison_rows.append(_design_fields(design) + [base, alt, name] + [fmt(v) for v in red])
    return summary_rows, comparison_rows, failed_cells


def write_results(out_dir, summary_rows, comparison_rows):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, header, rows in (
        ("summary.csv", SUMMARY_COLUMNS, summary_rows),
        ("comparison.csv", COMPARISON_COLUMNS, comparison_rows),
    ):
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    return out_dir / "summary.csv", out_dir / "comparison.csv"
