#!/usr/bin/env python3
"""Run the three benchmark presets end to end and write learning curves.

Each preset compares AKFQL, KFQL, and PTD on one environment with the
published hyperparameters. Expect a multi-hour wall clock on one core at
full budgets; pass --scale to shrink budgets for a quick look.

Usage:
    python3 scripts/run_benchmarks.py --out results/ [--scale 0.1]
"""
import argparse
import sys

from kfql.cli import main as kfql_main

PRESETS = ("cartpole-paper", "cashier-paper", "carhill-paper")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--scale", type=float, default=1.0,
                    help="multiply every budget by this factor")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    for preset in PRESETS:
        argv = ["run", "--config", preset,
                "--out", f"{args.out}/{preset}",
                "--threads", str(args.threads)]
        if args.scale != 1.0:
            from kfql.config import PRESETS as TABLE
            for i, ls in enumerate(TABLE[preset]["learners"]):
                budget = max(1, int(ls["budget"] * args.scale))
                argv += ["--set", f"learners.{i}.budget={budget}"]
        print(f"=== {preset} ===", flush=True)
        code = kfql_main(argv)
        if code != 0:
            print(f"{preset} exited with {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
