"""Command-line interface.

Subcommands:
  run <config>        execute one experiment, emit the report
  validate <config>   check a config without running it
  suite <directory>   run every *.json config in a directory, print a summary

Exit codes: 0 all checks passed, 1 some check failed, 2 configuration
error.  Reports are deterministic for a fixed seed regardless of
``--workers``; wall-clock timing goes to stderr (or into the document
with ``--timing``).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import load_config
from .errors import CapacityError, ConfigurationError, JumpshiftError
from .runner import emit, run

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpshift",
        description="Jump-indexed shift experiments: run, validate, or batch configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--format", choices=("json", "csv"), default="json")
    p_run.add_argument("--out", type=Path, default=None, help="report destination (default stdout)")
    p_run.add_argument("--workers", type=int, default=1, help="Monte Carlo worker threads")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument(
        "--timing", action="store_true", help="include wall-clock duration in the document"
    )

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", type=Path)

    p_suite = sub.add_parser("suite", help="run every *.json config in a directory")
    p_suite.add_argument("directory", type=Path)
    p_suite.add_argument("--format", choices=("json", "csv"), default="json")
    p_suite.add_argument("--out", type=Path, default=None, help="directory for per-config reports")
    p_suite.add_argument("--workers", type=int, default=1)
    p_suite.add_argument("--seed", type=int, default=None)
    p_suite.add_argument("--timing", action="store_true")
    return parser


def _load(path: Path, seed_override):
    config = load_config(path)
    if seed_override is not None:
        if not 0 <= seed_override < 2**64:
            raise ConfigurationError(f"seed: must be a 64-bit unsigned integer, got {seed_override}")
        raw = dict(config.raw)
        raw["seed"] = seed_override
        config = dataclasses.replace(config, seed=seed_override, raw=raw)
    return config


def _cmd_run(args) -> int:
    try:
        config = _load(args.config, args.seed)
    except ConfigurationError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run(config, workers=args.workers)
    except (ConfigurationError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JumpshiftError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    emit(report, format=args.format, destination=args.out, include_timing=args.timing)
    print(
        f"{args.config.name}: {'PASS' if report.passed else 'FAIL'} "
        f"({report.duration_seconds:.2f}s)",
        file=sys.stderr,
    )
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except ConfigurationError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.config}: valid")
    return EXIT_PASS


def _cmd_suite(args) -> int:
    directory: Path = args.directory
    if not directory.is_dir():
        print(f"config error: {directory} is not a directory", file=sys.stderr)
        return EXIT_CONFIG
    paths = sorted(directory.glob("*.json"))
    if not paths:
        print(f"config error: no *.json configs in {directory}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    any_fail = False
    rows = []
    for path in paths:
        try:
            config = _load(path, args.seed)
        except ConfigurationError as exc:
            for problem in exc.problems:
                print(f"config error in {path.name}: {problem}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            report = run(config, workers=args.workers)
        except (ConfigurationError, CapacityError) as exc:
            print(f"config error in {path.name}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except JumpshiftError as exc:
            print(f"run failed for {path.name}: {exc}", file=sys.stderr)
            any_fail = True
            rows.append((path.name, config.experiment.kind, False, 0.0))
            continue
        any_fail = any_fail or not report.passed
        if args.out is not None:
            ext = "csv" if args.format == "csv" else "json"
            emit(
                report,
                format=args.format,
                destination=args.out / f"{path.stem}.report.{ext}",
                include_timing=args.timing,
            )
        rows.append((path.name, report.experiment, report.passed, report.duration_seconds))
    width = max(len(name) for name, *_ in rows)
    print(f"{'config'.ljust(width)}  {'experiment':<20}  result  seconds")
    for name, kind, passed, seconds in rows:
        verdict = "PASS" if passed else "FAIL"
        print(f"{name.ljust(width)}  {kind:<20}  {verdict}    {seconds:7.2f}")
    return EXIT_FAIL if any_fail else EXIT_PASS


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_suite(args)


if __name__ == "__main__":
    sys.exit(main())
