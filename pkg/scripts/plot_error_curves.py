"""Summarize a scaling sweep as ASCII error curves.

Reads the JSON-lines output of run_scaling_experiments.py (or the sweep
subcommand), groups rows by regime and budget, and prints the median
absolute error against the chosen grid axis together with a fitted
log-log slope. Bars scale with log error, so a straight staircase means
a clean power law.
"""

import argparse
import json
import math
from collections import defaultdict

import numpy as np


def load_rows(path: str) -> list[dict]:
    rows = []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "schema_version" in obj:
                continue
            rows.append(obj)
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("results", help="JSON-lines sweep output")
    parser.add_argument(
        "--metric",
        default="auc",
        help="row metric to plot (auc, precision, recall, accuracy, ece)",
    )
    parser.add_argument("--axis", default="M", choices=("M", "B", "h"))
    args = parser.parse_args(argv)

    rows = [
        row
        for row in load_rows(args.results)
        if row["metric"] == args.metric
        and not row.get("degenerate")
        and row["abs_error"] is not None
    ]
    if not rows:
        print("no matching rows")
        return 1

    groups: dict[tuple, dict] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        groups[(row["regime"], row["epsilon"])][row[args.axis]].append(
            row["abs_error"]
        )

    for (regime, epsilon), series in sorted(groups.items(), key=str):
        xs = sorted(series)
        medians = [float(np.median(series[x])) for x in xs]
        label = regime if epsilon is None else f"{regime} eps={epsilon:g}"
        print(f"\n{label}  ({args.metric} vs {args.axis})")
        positive = [m for m in medians if m > 0.0]
        floor = min(positive) if positive else 1.0
        for x, med in zip(xs, medians):
            if med > 0.0:
                bar = "#" * (1 + int(round(4 * math.log10(med / floor))))
            else:
                bar = ""
            print(f"  {args.axis}={x:>8}  median|err|={med:.3e}  {bar}")
        fit = [(x, m) for x, m in zip(xs, medians) if m > 0.0]
        if len(fit) >= 2:
            slope = np.polyfit(
                np.log([p[0] for p in fit]), np.log([p[1] for p in fit]), 1
            )[0]
            print(f"  log-log slope: {slope:+.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
