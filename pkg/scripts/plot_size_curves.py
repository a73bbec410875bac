#!/usr/bin/env python3
"""Plot avg_zs vs training size from a report CSV (`explainrank report
--out-csv`), one line per model, log-scaled x axis.

Usage: python scripts/plot_size_curves.py report.csv -o curves.png
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv_path")
    parser.add_argument("-o", "--out", default="size_curves.png")
    args = parser.parse_args()

    series = defaultdict(list)
    with open(args.csv_path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            if row.get("avg_zs"):
                series[row["model"]].append((int(row["ft_pos"]), float(row["avg_zs"])))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for model, points in sorted(series.items()):
        points.sort()
        ax.plot(*zip(*points), marker="o", label=model)
    ax.set_xscale("log")
    ax.set_xlabel("training positives")
    ax.set_ylabel("avg zero-shot nDCG@10")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
