"""Command-line front end.

Subcommands::

    aoiq analytic -c spec.ini [overrides]   closed-form metrics to CSV
    aoiq simulate -c spec.ini [overrides]   simulation to CSV
    aoiq sweep    -c spec.ini [overrides]   sweep per the config's mode
    aoiq validate -c spec.ini [overrides]   full cross-validation suite

Flags override config-file keys (flag > file > default). Exit codes:
0 success, 1 usage/config error, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

from .analytic import ConsistencyError, OutsideConvergenceRegion
from .config import ParseError, ValidationError, build_spec, load_raw
from .jets import DivisionBySingularJet, NonVanishingConstantTerm
from .semimarkov import SingularSystem
from .service import ConvergenceError, MgfDomainError
from .sim import InvalidConfig, Policy, PolicyKind, run
from .sweep import format_number, iter_sweep_rows, write_rows
from .validate import validation_suite

_NUMERICAL_ERRORS = (
    ConvergenceError,
    MgfDomainError,
    DivisionBySingularJet,
    NonVanishingConstantTerm,
    SingularSystem,
    ConsistencyError,
    OutsideConvergenceRegion,
)

_OVERRIDES = {
    # flag dest -> (section, key)
    "arrival_rates": ("system", "arrival_rates"),
    "theta": ("system", "theta"),
    "service": ("system", "service"),
    "axis": ("sweep", "axis"),
    "start": ("sweep", "start"),
    "stop": ("sweep", "stop"),
    "points": ("sweep", "points"),
    "policies": ("sweep", "policies"),
    "mode": ("sweep", "mode"),
    "horizon": ("simulation", "horizon"),
    "delivered": ("simulation", "delivered"),
    "warmup_fraction": ("simulation", "warmup_fraction"),
    "seed": ("simulation", "seed"),
    "replications": ("simulation", "replications"),
    "batches": ("simulation", "batches"),
    "output": ("output", "path"),
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("-c", "--config", required=True, help="spec file (INI sections)")
    sub.add_argument("--workers", type=int, default=1, help="parallel replication workers")
    sub.add_argument("--arrival-rates", dest="arrival_rates")
    sub.add_argument("--theta")
    sub.add_argument("--service")
    sub.add_argument("--axis")
    sub.add_argument("--start")
    sub.add_argument("--stop")
    sub.add_argument("--points")
    sub.add_argument("--policies")
    sub.add_argument("--mode")
    sub.add_argument("--horizon")
    sub.add_argument("--delivered")
    sub.add_argument("--warmup-fraction", dest="warmup_fraction")
    sub.add_argument("--seed")
    sub.add_argument("--replications")
    sub.add_argument("--batches")
    sub.add_argument("-o", "--output")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoiq",
        description="AoI/PAoI analysis of multi-source M/G/1/1 update queues",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("analytic", "closed-form metrics (forces mode=analytic)"),
        ("simulate", "simulation metrics (forces mode=simulate)"),
        ("sweep", "sweep per the config's mode"),
        ("validate", "run the cross-validation suite"),
    ):
        sub = subs.add_parser(name, help=text)
        _add_common(sub)
        if name == "simulate":
            sub.add_argument(
                "--dump-samples",
                help="also write one CSV row per delivered packet to this path",
            )
    return parser


def _spec_from_args(args) -> "ExperimentSpec":
    try:
        with open(args.config) as fh:
            raw = load_raw(fh.read())
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from exc
    for dest, (section, key) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            raw.setdefault(section, {})[key] = str(value)
    if args.command == "analytic":
        raw.setdefault("sweep", {})["mode"] = "analytic"
    elif args.command == "simulate":
        raw.setdefault("sweep", {})["mode"] = "simulate"
    # an explicit stop-rule flag replaces the file's rule instead of clashing
    sim_raw = raw.get("simulation", {})
    if getattr(args, "horizon", None) is not None:
        sim_raw.pop("delivered", None)
    elif getattr(args, "delivered", None) is not None:
        sim_raw.pop("horizon", None)
    return build_spec(raw)


def _dump_deliveries(path: str, deliveries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["source", "generation_time", "delivery_time", "system_time",
             "interdeparture", "paoi"]
        )
        for row in deliveries:
            source = int(row[0]) + 1
            cells = [str(source)] + [
                "" if math.isnan(v) else format_number(v) for v in row[1:]
            ]
            writer.writerow(cells)


def _cmd_table(args) -> int:
    spec = _spec_from_args(args)
    if args.command == "simulate" and getattr(args, "dump_samples", None):
        if spec.axis != "none":
            print("--dump-samples needs a single-point spec (axis = none)", file=sys.stderr)
            return 1
        report = run(
            spec.system,
            _single_policy(spec),
            spec.sim,
            workers=args.workers,
            collect_deliveries=True,
        )
        _dump_deliveries(args.dump_samples, report.deliveries)
    n = write_rows(spec.output_path, iter_sweep_rows(spec, workers=args.workers))
    print(f"wrote {n} rows to {spec.output_path}")
    return 0


def _single_policy(spec) -> Policy:
    kind = spec.policies[0]
    if kind is PolicyKind.PROBABILISTIC:
        return Policy.probabilistic(spec.system.theta)
    return Policy(kind)


def _cmd_validate(args) -> int:
    spec = _spec_from_args(args)
    report = validation_suite(spec, workers=args.workers)
    width = max(len(c.name) for c in report.checks)
    for c in report.checks:
        line = f"{c.status.upper():4s} {c.name:<{width}s}"
        if not math.isnan(c.discrepancy):
            line += f"  discrepancy={c.discrepancy:.3g} tol={c.tolerance:.3g}"
        if c.detail:
            line += f"  ({c.detail})"
        print(line)
    failed = [c for c in report.checks if not c.passed]
    print(f"{len(report.checks) - len(failed)}/{len(report.checks)} checks passed")
    return 0 if report.all_passed else 2


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_table(args)
    except (ParseError, ValidationError, InvalidConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
