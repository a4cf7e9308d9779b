"""Command line front end.

    cfwd run   <plan-file> [--out DIR] [--replicas N] [--seed S] [--quiet]
    cfwd sweep <plan-file> [--out DIR] [--replicas N] [--seed S] [--quiet]
    cfwd check [--quiet]

``run`` executes a plan and writes its result tables; ``sweep`` does the
same for a plan with a potential sweep and prints the particle-count growth
table; ``check`` runs the built-in invariant battery.  The only environment
variable consulted is CFWD_OUT_DIR, the base of the default output
directory.

Exit codes: 0 success, 1 usage or configuration error, 2 invariant
violation (with a JSON dump next to the results), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .dynamics import InvariantViolation
from .harness import PlanError, default_out_dir, emit, parse_plan, run_plan

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfwd",
        description="Sticky ordered diffusions with mass-scaled noise: "
        "run experiment plans and verify the dynamics' invariants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_plan_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("plan", type=Path, help="YAML plan file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument(
            "--replicas", type=int, default=None, help="override the replica count"
        )
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        return p

    add_plan_command("run", "execute a plan and write CSV results")
    add_plan_command("sweep", "execute a potential sweep and print count growth")
    check = sub.add_parser("check", help="run the built-in invariant battery")
    check.add_argument("--quiet", action="store_true", help="print only the verdict")
    return parser


def _load_plan(args):
    plan = parse_plan(args.plan)
    if args.replicas is not None:
        if args.replicas < 1:
            raise PlanError(f"--replicas must be >= 1, got {args.replicas}")
        plan = replace(plan, replicas=args.replicas)
    if args.seed is not None:
        plan = replace(plan, config=replace(plan.config, seed=args.seed))
    return plan


def _dump_violation(out: Path, exc: InvariantViolation) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "violation.json"
    path.write_text(json.dumps(exc.detail, sort_keys=True, indent=2) + "\n")
    return path


def _execute(args, require_sweep: bool) -> int:
    plan = _load_plan(args)
    if require_sweep and not plan.sweep:
        raise PlanError("this plan has no sweep section; use 'cfwd run' instead")
    out = args.out if args.out is not None else default_out_dir(plan.name)
    try:
        bundle = run_plan(plan)
    except InvariantViolation as exc:
        dump = _dump_violation(out, exc)
        print(f"error: {exc}", file=sys.stderr)
        print(f"state dump written to {dump}", file=sys.stderr)
        return EXIT_INVARIANT
    files = emit(bundle, out)
    if not args.quiet:
        for label, group in zip(bundle.labels, bundle.records):
            finals = [int(rec.counts[-1]) for rec in group]
            sups = [int(rec.counts.max()) for rec in group]
            print(
                f"{label}: {len(group)} replicas, "
                f"final particles {min(finals)}..{max(finals)}, "
                f"running max {min(sups)}..{max(sups)}"
            )
        print(f"wrote {len(files)} files to {out}")
    if require_sweep and not args.quiet:
        _print_sweep_table(bundle)
    return EXIT_OK


def _print_sweep_table(bundle) -> None:
    import numpy as np

    print(f"{'potential':>12} {'levels':>7} {'mean sup #X':>12} {'se':>9}")
    for label, group in zip(bundle.labels, bundle.records):
        sups = np.array([float(np.max(rec.counts)) for rec in group])
        se = float(np.std(sups, ddof=1) / np.sqrt(sups.size)) if sups.size > 1 else 0.0
        levels = int(group[0].metadata["distinct_levels"])
        print(f"{label:>12} {levels:>7} {float(np.mean(sups)):>12.3f} {se:>9.3f}")


def _check(args) -> int:
    from .selfcheck import run_selfcheck

    ok, lines = run_selfcheck()
    if not args.quiet:
        for line in lines:
            print(line)
    print("all checks passed" if ok else "CHECKS FAILED")
    return EXIT_OK if ok else EXIT_INVARIANT


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; fold the
        # latter into the configuration-error code.
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "run":
            return _execute(args, require_sweep=False)
        if args.command == "sweep":
            return _execute(args, require_sweep=True)
        return _check(args)
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
