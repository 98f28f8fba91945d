"""Run the population and resolution scaling grids, one JSON row per cell.

Covers the three privacy regimes at their usual budgets: exact integer
sums, distributed noise at epsilon 1, and per-report randomization at
epsilon 5. Rows go to a JSON-lines file that plot_error_curves.py can
summarize. The full grid takes a few minutes; --quick runs a small
smoke-size version of the same shape.
"""

import argparse
from pathlib import Path

from fedeval.io import result_header_line, row_to_json
from fedeval.sweep import parse_sweep_config, run_sweep

CENTRAL_GRID = """
base_seed = {seed}
regimes = secure_agg, dist_dp
num_examples = {populations}
num_buckets = 10, 25, 50, 100
heights = 10
epsilons = 1.0
thresholds = 0.4
repetitions = {reps}
eval_bins = 20
"""

LOCAL_GRID = """
base_seed = {seed}
regimes = local_dp
num_examples = {populations}
num_buckets = 100
heights = 10
epsilons = 5.0
thresholds = 0.4
repetitions = {reps}
eval_bins = 20
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results.jsonl")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--quick", action="store_true", help="small grid for a fast smoke run"
    )
    args = parser.parse_args(argv)

    if args.quick:
        populations, reps = "1000, 10000", 2
    else:
        populations, reps = "10000, 100000, 1000000", 5

    rows = []
    for template in (CENTRAL_GRID, LOCAL_GRID):
        config = parse_sweep_config(
            template.format(seed=args.seed, populations=populations, reps=reps)
        )
        rows.extend(run_sweep(config))

    out = Path(args.out)
    with out.open("w") as handle:
        handle.write(result_header_line() + "\n")
        for row in rows:
            handle.write(row_to_json(row) + "\n")
    print(f"wrote {len(rows)} rows to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
