#!/usr/bin/env python3
"""Plot learning curves from the CSV files the CLI writes.

Reads every *.csv under the given directories, groups rows by
(learner, method), and plots mean performance against visited states
with stderr error bars. Requires matplotlib (not a package dependency).

Usage:
    python3 scripts/plot_curves.py results/cartpole-paper [more dirs...] \
        [--out curves.png] [--logx]
"""
import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path


def load_dir(path):
    series = defaultdict(dict)
    for csv_path in sorted(Path(path).glob("*.csv")):
        with open(csv_path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["learner"], row["method"])
                x = int(row["visited_states"])
                if row["run"] in ("mean", "stderr"):
                    series[key].setdefault(x, {})[row["run"]] = \
                        float(row["performance"])
    return series


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dirs", nargs="+")
    ap.add_argument("--out", default=None, help="save instead of show")
    ap.add_argument("--logx", action="store_true")
    args = ap.parse_args()

    try:
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is required: pip install matplotlib",
              file=sys.stderr)
        return 1

    fig, axes = plt.subplots(1, len(args.dirs), squeeze=False,
                             figsize=(6 * len(args.dirs), 4.5))
    for ax, d in zip(axes[0], args.dirs):
        for (learner, method), points in sorted(load_dir(d).items()):
            xs = sorted(points)
            means = [points[x].get("mean") for x in xs]
            errs = [points[x].get("stderr", 0.0) for x in xs]
            label = learner if method == "none" else f"{learner}/{method}"
            ax.errorbar(xs, means, yerr=errs, label=label, capsize=2)
        ax.set_title(Path(d).name)
        ax.set_xlabel("visited states")
        ax.set_ylabel("performance")
        if args.logx:
            ax.set_xscale("log")
        ax.legend()
    fig.tight_layout()
    if args.out:
        fig.savefig(args.out, dpi=150)
        print(f"wrote {args.out}")
    else:
        plt.show()
    return 0


if __name__ == "__main__":
    sys.exit(main())
