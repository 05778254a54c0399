"""Command-line entry point.

One subcommand per scenario kind; every subcommand takes YAML config files
and shared output options. Exit codes: 0 success, 1 usage or schema problems,
2 a computation that failed to converge or had no solution, 3 a capacity
limit (problem too large for the implemented methods).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

from .errors import CapacityError, ComputationError, SchemaError
from .scenario import (KINDS, STOCHASTIC_KINDS, parse_scenario, run_scenario,
                       write_outputs)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTATION = 2
EXIT_CAPACITY = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here reserves 2 for
    computation failures, so usage problems map to 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stgames",
                     description="Run game-theoretic scenarios from YAML configs.")
    sub = parser.add_subparsers(dest="command", metavar="KIND")
    descriptions = {
        "coop": "coalition values: Shapley, core, nucleolus",
        "match": "two-sided matching via deferred acceptance",
        "nash": "pure equilibria, welfare and price of anarchy",
        "learn": "learning dynamics on a strategic game",
        "ttscale": "slow coordinator over fast learning epochs",
        "stackelberg": "leader signal choice against follower equilibria",
        "wardrop": "routing equilibrium, optimum, Braess delta, tolls",
        "incentive": "minimal transfers making a target profile stable",
        "resilience": "consensus under adversarial reports",
    }
    for kind in KINDS:
        p = sub.add_parser(kind, help=descriptions[kind], description=descriptions[kind])
        p.add_argument("--config", action="append", required=True,
                       metavar="FILE", help="YAML scenario config (repeatable)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed"
                            + (" (required for this kind if the config has none)"
                               if kind in STOCHASTIC_KINDS else ""))
        p.add_argument("--out", default=None, metavar="DIR",
                       help="directory for result files (default: print summary)")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                       help="output file format (default: csv)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes when running several configs")
        p.add_argument("--quiet", action="store_true",
                       help="suppress the summary line per config")
    return parser


def _run_one(kind, path, seed, out_dir, fmt):
    """Worker body; returns (path, summary dict, written paths)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(f"cannot read config: {exc}") from exc
    cfg = parse_scenario(text, seed_override=seed)
    if cfg.kind != kind:
        raise SchemaError(f"config is kind {cfg.kind!r}, command expects {kind!r}",
                          "kind")
    record = run_scenario(cfg)
    written = []
    if out_dir is not None:
        stem = os.path.splitext(os.path.basename(path))[0]
        written = write_outputs(record, out_dir, stem, fmt=fmt)
    return path, record.summary, written


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    jobs = max(1, args.jobs)
    tasks = [(args.command, path, args.seed, args.out, args.format)
             for path in args.config]
    try:
        if jobs == 1 or len(tasks) == 1:
            results = [_run_one(*t) for t in tasks]
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_run_one, *zip(*tasks)))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path, summary, written in results:
        if not args.quiet:
            print(f"{path}: {json.dumps(summary, sort_keys=True, default=str)}")
        for w in written:
            if not args.quiet:
                print(f"  wrote {w}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
