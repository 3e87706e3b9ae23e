"""Command-line entry point: ``complier-profile profile|simulate``."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import __version__
from .errors import ProfilingError
from .report import (
    EXIT_INPUT,
    EXIT_OK,
    RunConfig,
    emit_coverage,
    emit_report,
    exit_code_for,
    run_profile,
)
from .simulate import SIZE_GRID, run_coverage_experiment


def _int_list(values: Sequence[str]) -> list[int]:
    out = []
    for v in values:
        out.extend(int(p) for p in v.split(",") if p.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complier-profile",
        description="Covariate profiles of compliers, always-takers and never-takers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="profile a CSV dataset")
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--instrument", default="z")
    p.add_argument("--treatment", default="d")
    p.add_argument("--covariates", default=None,
                   help="comma-separated columns (default: every other numeric column)")
    p.add_argument("--se", choices=("plugin", "bootstrap", "both"), default="plugin")
    p.add_argument("--boot", type=int, default=1000, help="bootstrap replicates")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--match-id", default=None,
                   help="matched-set id column; accepted and ignored by estimation")
    p.add_argument("--weak-threshold", type=float, default=0.01)
    p.add_argument("--interval", choices=("normal", "percentile"), default="normal",
                   help="bootstrap interval type")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", default=None, help="write to file instead of stdout")

    s = sub.add_parser("simulate", help="Monte Carlo coverage experiment")
    s.add_argument("--variant", choices=("fixed", "random"), required=True)
    s.add_argument("--sizes", nargs="+", default=None,
                   help="sample sizes, space- or comma-separated (default: 13-size grid)")
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--boot", type=int, default=1000, help="bootstrap replicates (0 disables)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json", "text"), default="csv")
    s.add_argument("--output", default=None)
    return parser


def _write(payload: bytes, output: str | None) -> None:
    if output:
        with open(output, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()


def _profile(args: argparse.Namespace) -> int:
    try:
        config = RunConfig(
            input=args.input,
            instrument=args.instrument,
            treatment=args.treatment,
            covariates=None if args.covariates is None
            else tuple(c.strip() for c in args.covariates.split(",") if c.strip()),
            se=args.se,
            boot=args.boot,
            level=args.level,
            seed=args.seed,
            format=args.format,
            match_id=args.match_id,
            weak_threshold=args.weak_threshold,
            interval=args.interval,
            workers=args.workers,
        )
    except ValueError as exc:
        print(f"error [input-error]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    status, report = run_profile(config)
    error = report.metadata.get("error")
    if error:
        print(f"error [{error['code']}]: {error['message']}", file=sys.stderr)
    if status == EXIT_OK or config.format == "json":
        _write(emit_report(report, config.format), args.output)
    return status


def _simulate(args: argparse.Namespace) -> int:
    sizes = SIZE_GRID if args.sizes is None else _int_list(args.sizes)
    try:
        result = run_coverage_experiment(
            args.variant,
            sizes=sizes,
            reps=args.reps,
            bootstrap_B=args.boot,
            seed=args.seed,
            level=args.level,
            workers=args.workers,
        )
    except ValueError as exc:
        print(f"error [input-error]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProfilingError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    _write(emit_coverage(result, args.format), args.output)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "profile":
        return _profile(args)
    return _simulate(args)


if __name__ == "__main__":
    raise SystemExit(main())
