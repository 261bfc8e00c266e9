"""Command-line entry point::

    polydiff <simulate|dissipation|attract|mms|verify> --config PATH [--out DIR] [--seed N] [--threads N]

Exit status is 0 on success, 2 when a check fails and 1 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import COMMANDS, thread_count
from .solver import SolverDivergence


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polydiff", description="Viscoelastic diffusion simulator and long-time diagnostics.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    helps = {
        "simulate": "one trajectory, energy CSV and final-field snapshots",
        "dissipation": "calibrate and validate the absorbing energy level",
        "attract": "attraction functional on an ensemble",
        "mms": "manufactured-solution convergence tables",
        "verify": "identity and oracle checks",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="ensemble seed (overrides diagnostics.seed)")
        p.add_argument("--threads", help="worker threads; defaults to $POLYDIFF_THREADS or 1")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = thread_count(args.threads)
        if args.seed is not None and args.seed < 0:
            raise UsageError("polydiff: --seed must be nonnegative")
        cfg = load_config(args.config)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"polydiff: {exc}", file=sys.stderr)
        return 1

    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = args.out if args.out is not None else cfg.output["directory"]
    try:
        outcome = COMMANDS[args.command](cfg, out, threads)
    except SolverDivergence as exc:
        print(f"polydiff: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"polydiff: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(outcome.summary)
    return 0 if outcome.ok else 2


if __name__ == "__main__":
    sys.exit(main())
