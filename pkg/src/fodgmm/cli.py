"""Command line interface.

Exit codes: 0 success, 1 bad input (config, CSV), 2 estimation failure,
3 equivalence verdict inconsistent with the estimates.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import load_config
from .estimators import EQUIVALENCE_TOL, equivalence_report, estimate
from .exceptions import ConfigError, GMMError, InvalidDimensionError, PanelFormatError
from .experiment import fmt, run_grid, write_results
from .instruments import get_scheme
from .panel_io import read_panel_csv, write_panel_csv
from .simulation import ERROR_MODELS, DesignPoint, generate_panel, replication_seed

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ESTIMATION = 2
EXIT_INCONSISTENT = 3

logger = logging.getLogger("fodgmm")


def _coef_names(n):
    return ["delta"] + (["alpha"] if n == 2 else [f"alpha{p}" for p in range(1, n)])


def _print_estimate(est, out):
    print(f"transform: {est.transform_kind}  step: {est.step}  scheme: {est.scheme}", file=out)
    print(f"moments: {est.moments}  individuals: {est.n_individuals}", file=out)
    print(f"condition number: {fmt(est.condition_number)}", file=out)
    for name, b in zip(_coef_names(len(est.beta)), est.beta):
        print(f"{name:<8s}{fmt(b)}", file=out)
    for note in est.warnings:
        print(f"warning: {note}", file=out)


def _load_panel(path):
    try:
        return read_panel_csv(path), None
    except (PanelFormatError, InvalidDimensionError) as exc:
        return None, f"error: {path}: {exc}"
    except OSError as exc:
        return None, f"error: cannot read {path}: {exc.strerror}"


def cmd_estimate(args, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    panel, msg = _load_panel(args.csv)
    if panel is None:
        print(msg, file=err)
        return EXIT_INPUT
    try:
        est = estimate(panel, args.transform, args.scheme, args.step, args.system)
    except GMMError as exc:
        print(f"estimation failed ({exc.code}): {exc}", file=err)
        return EXIT_ESTIMATION
    _print_estimate(est, out)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(est.to_record(), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _synthetic_design(args):
    return DesignPoint(
        N=args.N,
        T=args.T,
        delta=args.delta,
        rho=args.rho,
        sigma_eta=args.sigma_eta,
        error_model=args.error_model,
        master_seed=args.seed,
    )


def cmd_check_equivalence(args, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    if args.csv:
        panel, msg = _load_panel(args.csv)
        if panel is None:
            print(msg, file=err)
            return EXIT_INPUT
    else:
        design = _synthetic_design(args)
        panel = generate_panel(design, replication_seed(design.master_seed, 0))
    try:
        report = equivalence_report(panel, args.scheme, system=args.system)
    except GMMError as exc:
        print(f"equivalence check failed ({exc.code}): {exc}", file=err)
        return EXIT_ESTIMATION
    if report.nested:
        print("NESTED", file=out)
    else:
        s, t, col = report.witness
        print(f"NOT NESTED: instrument {col} of block {s} is not spanned by block {t} "
              f"(witness s={s}, t={t}, column={col})", file=out)
    print(f"transfer-matrix residual: {fmt(report.transfer_residual)}", file=out)
    label = "-SYS" if args.system else ""
    for name, est in (("FD" + label, report.fd), ("FOD" + label, report.fod)):
        if est is None:
            exc = report.errors.get(name.split("-")[0].lower()) or report.errors.get("initial")
            print(f"{name}: failed ({exc.code}): {exc}", file=out)
        else:
            print(f"{name}: " + " ".join(fmt(b) for b in est.beta), file=out)
    if report.fd is None or report.fod is None:
        return EXIT_ESTIMATION
    print(f"max rel diff: {report.max_rel_diff:.3g}", file=out)
    if not report.consistent:
        print(f"INCONSISTENT: nesting verdict disagrees with estimates at tolerance {EQUIVALENCE_TOL:g}", file=out)
        return EXIT_INCONSISTENT
    return EXIT_OK


def cmd_run_experiment(args, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=err)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=err)
        return EXIT_INPUT
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.out is not None:
        overrides["out"] = args.out
    config = replace(config, **overrides)
    threads = args.threads if args.threads is not None else config.threads
    summary, comparison, failed = run_grid(config, threads=threads)
    paths = write_results(config.out, summary, comparison)
    for p in paths:
        print(f"wrote {p}", file=out)
    if failed:
        print(f"{failed} grid cell(s) had failed replications", file=err)
        return EXIT_ESTIMATION
    return EXIT_OK


def cmd_simulate(args, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    design = _synthetic_design(args)
    panel = generate_panel(design, replication_seed(design.master_seed, args.rep))
    write_panel_csv(panel, args.output)
    print(f"wrote {args.output}", file=out)
    return EXIT_OK


def _add_design_flags(p):
    p.add_argument("--T", type=int, default=6, help="final period index (default 6)")
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--sigma-eta", dest="sigma_eta", type=float, default=1.0)
    p.add_argument("--error-model", dest="error_model", choices=ERROR_MODELS, default="conditional-hetero")
    p.add_argument("--seed", type=int, default=0)


def _scheme(name):
    try:
        return get_scheme(name).name
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    parser = argparse.ArgumentParser(prog="fodgmm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-experiment", help="run a Monte Carlo grid from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("estimate", help="estimate from a panel CSV (id,t,y,x1..)")
    p.add_argument("csv")
    p.add_argument("--transform", choices=("fd", "fod"), default="fod")
    p.add_argument("--system", action="store_true")
    p.add_argument("--scheme", type=_scheme, default="recent-lags")
    p.add_argument("--step", type=int, choices=(1, 2), default=2)
    p.add_argument("--json", metavar="PATH", help="also write the estimate as JSON")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check-equivalence", help="test FD/FOD two-step equivalence")
    p.add_argument("csv", nargs="?", help="panel CSV; simulated data is used when omitted")
    p.add_argument("--scheme", type=_scheme, default="all-lags")
    p.add_argument("--system", action="store_true")
    _add_design_flags(p)
    p.set_defaults(func=cmd_check_equivalence)

    p = sub.add_parser("simulate", help="write one simulated panel as CSV")
    p.add_argument("output")
    p.add_argument("--rep", type=int, default=0, help="replication index")
    _add_design_flags(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which here means estimation failure
        return EXIT_INPUT if exc.code == 2 else exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
