"""Command-line batch driver.

Subcommands: generate, experiment, bounds, plotdata, solve. Exit codes:
0 success, 1 usage or configuration error, 2 partial failure (some cells
marked infeasible), 3 numerical blowup.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    SchemaError,
    cmd_bounds,
    cmd_experiment,
    cmd_generate,
    cmd_plotdata,
    cmd_solve,
    load_config,
)
from .feasible import InfeasibleOrIllConditioned
from .solver import NumericalBlowup


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise _UsageError(message)


def _add_common(parser: _Parser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="base seed override")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--reproducible", dest="reproducible", action="store_true", default=None)
    parser.add_argument("--no-reproducible", dest="reproducible", action="store_false")
    parser.add_argument("--relax-slack", type=float, default=None,
                        help="replace the constraint level 0 by +s during solves")
    parser.add_argument("--game", default=None,
                        choices=["portfolio", "production", "toy-quadratic"])


def build_parser() -> _Parser:
    parser = _Parser(prog="eqlearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "write train/test dataset CSVs"),
        ("experiment", "run the offline-learning sweep and write results/summary"),
        ("bounds", "evaluate deviation bounds and optional Monte-Carlo study"),
        ("solve", "run a single offline solve and dump the report"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "solve":
            p.add_argument("--n", type=int, default=None, help="training sample count")
            p.add_argument("--cell-seed", type=int, default=None, help="dataset seed")
    p = sub.add_parser("plotdata", help="convert a results CSV into long-format plot series")
    p.add_argument("results", help="path to a results.csv produced by `experiment`")
    p.add_argument("--out", default="plotdata.csv", help="output CSV path")
    return parser


def _resolve(args) -> "RunConfig":
    overrides = {
        "base_seed": args.seed,
        "out": args.out,
        "reproducible": args.reproducible,
        "relax_slack": args.relax_slack,
        "game": args.game,
    }
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "plotdata":
            out = cmd_plotdata(args.results, args.out)
            print(out)
            return 0
        cfg = _resolve(args)
        if args.command == "generate":
            for path in cmd_generate(cfg):
                print(path)
            return 0
        if args.command == "experiment":
            result = cmd_experiment(cfg)
            print(result.results_path)
            print(result.summary_path)
            return result.exit_code
        if args.command == "bounds":
            bounds_path, freq_path = cmd_bounds(cfg)
            print(bounds_path)
            if freq_path is not None:
                print(freq_path)
            return 0
        if args.command == "solve":
            print(cmd_solve(cfg, n=args.n, seed=args.cell_seed))
            return 0
        raise _UsageError(f"unknown command {args.command!r}")
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalBlowup as exc:
        print(f"numerical blowup: {exc}", file=sys.stderr)
        return 3
    except InfeasibleOrIllConditioned as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
