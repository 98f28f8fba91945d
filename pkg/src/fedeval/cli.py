"""Command line front end.

Subcommands: gen-data writes a synthetic labeled-score CSV; evaluate
builds the federated structures from a CSV and prints metric rows;
sweep runs a grid from a config file; calibrate fits a calibration map
on half the data and scores it on the other half. All randomness is
controlled by an explicit seed, and without --timings the output of a
run is byte identical across reruns.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or data
parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .calibration import (
    apply_calibration_batch,
    calibrate_bbq,
    calibrate_histogram,
    ece_arrays,
)
from .core import (
    InsufficientPopulationError,
    Label,
    PrivacySpec,
    Regime,
    ScoreDistribution,
    as_arrays,
    as_generator,
)
from .datagen import gen_well_behaved, split_to_clients
from .hierarchy import build_hierarchy, build_score_histogram
from .io import (
    DataFileError,
    read_data_file,
    result_header_line,
    row_to_json,
    write_data_file,
)
from .sweep import (
    SweepConfigError,
    SweepResultRow,
    _degenerate_records,
    _parse_spikes,
    histogram_metric_records,
    parse_sweep_config,
    run_sweep,
)

__all__ = ["main", "entry_point"]

DEFAULT_EPSILON = {Regime.DIST_DP: 1.0, Regime.LOCAL_DP: 5.0}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A002 - argparse API
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="fedeval",
        description="Federated evaluation and calibration of binary "
        "classifiers from aggregated score histograms.",
    )
    parser.set_defaults(func=None)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = sub.add_parser("gen-data", help="write a synthetic labeled-score CSV")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--num-examples", type=int, required=True)
    gen.add_argument("--balance", type=float, default=0.5,
                     help="probability of the positive class")
    gen.add_argument("--lipschitz", type=float, default=2.0,
                     help="smoothness bound for the linear densities")
    gen.add_argument("--pos-slope", type=float, default=None)
    gen.add_argument("--neg-slope", type=float, default=None)
    gen.add_argument("--spike", action="append", default=[],
                     metavar="LOC:POS_MASS:NEG_MASS",
                     help="point mass; repeatable")
    gen.add_argument("--spike-threshold", type=float, default=0.01)
    gen.add_argument("--seed", type=int, required=True)
    gen.set_defaults(func=cmd_gen_data)

    ev = sub.add_parser("evaluate", help="estimate metrics from a CSV")
    _add_privacy_args(ev)
    ev.add_argument("--buckets", type=int, required=True)
    ev.add_argument("--threshold", action="append", type=float, default=[],
                    help="decision threshold; repeatable")
    ev.add_argument("--tie-convention", choices=("half", "strict"),
                    default="half")
    ev.add_argument("--timings", action="store_true",
                    help="measure wall_ms (output no longer byte-stable)")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="run a config-driven grid sweep")
    sw.add_argument("--config", required=True, help="key = value config file")
    sw.add_argument("--timings", action="store_true",
                    help="measure wall_ms (output no longer byte-stable)")
    sw.set_defaults(func=cmd_sweep)

    cal = sub.add_parser(
        "calibrate",
        help="fit a calibration map on half the data, score it on the rest",
    )
    _add_privacy_args(cal)
    cal.add_argument("--buckets", type=int, default=None,
                     help="bucket count (ignored with --bbq)")
    cal.add_argument("--bbq", action="store_true",
                     help="Bayesian model averaging over bucket counts")
    cal.add_argument("--prior", type=float, default=None,
                     help="fallback probability for empty buckets")
    cal.add_argument("--eval-bins", type=int, default=20)
    cal.set_defaults(func=cmd_calibrate)

    return parser


def _add_privacy_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="labeled-score CSV path")
    sub.add_argument("--regime", required=True,
                     choices=[r.value for r in Regime])
    sub.add_argument("--epsilon", type=float, default=None,
                     help="privacy budget (defaults: dist_dp 1.0, local_dp 5.0)")
    sub.add_argument("--height", type=int, default=10)
    sub.add_argument("--fanout", type=int, default=2)
    sub.add_argument("--split", default="one_per_client",
                     help="client split policy")
    sub.add_argument("--seed", type=int, required=True)


def _resolve_privacy(args) -> PrivacySpec:
    regime = Regime(args.regime)
    epsilon = args.epsilon
    if regime is Regime.SECURE_AGG:
        if epsilon is not None:
            raise _UsageError("secure_agg does not take --epsilon")
    elif epsilon is None:
        epsilon = DEFAULT_EPSILON[regime]
    return PrivacySpec(
        regime=regime, epsilon=epsilon, height=args.height, fanout=args.fanout
    )


def cmd_gen_data(args) -> int:
    dist = ScoreDistribution(
        spikes=_parse_spikes(";".join(args.spike)),
        lipschitz=args.lipschitz,
        spike_threshold=args.spike_threshold,
        positive_slope=args.pos_slope,
        negative_slope=args.neg_slope,
    )
    examples = gen_well_behaved(
        args.num_examples, dist, args.balance, np.random.SeedSequence((args.seed,))
    )
    write_data_file(args.out, examples)
    print(f"wrote {len(examples)} examples to {args.out}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    examples = read_data_file(args.data)
    spec = _resolve_privacy(args)
    thresholds = tuple(args.threshold)
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise _UsageError(f"--threshold must lie in [0, 1], got {t}")
    started = time.perf_counter()
    split_ss, pos_ss, neg_ss = np.random.SeedSequence((args.seed,)).spawn(3)
    scores, flags = as_arrays(examples)
    try:
        shards = split_to_clients(examples, args.split, split_ss)
        pos = build_hierarchy(shards, Label.POSITIVE, spec, pos_ss)
        neg = build_hierarchy(shards, Label.NEGATIVE, spec, neg_ss)
        hist = build_score_histogram(pos, neg, args.buckets)
    except InsufficientPopulationError:
        records = _degenerate_records(
            scores, flags, thresholds, args.tie_convention, include_ece=False
        )
    else:
        records = histogram_metric_records(
            hist, scores, flags, thresholds, args.tie_convention
        )
    wall_ms = (time.perf_counter() - started) * 1000.0 if args.timings else None
    print(result_header_line())
    for metric, threshold, estimate, exact, advertised, degenerate in records:
        abs_error = None if estimate is None or exact is None else abs(estimate - exact)
        row = SweepResultRow(
            metric=metric,
            regime=spec.regime,
            num_examples=len(examples),
            num_buckets=args.buckets,
            height=args.height,
            epsilon=spec.epsilon,
            threshold=threshold,
            estimate=estimate,
            exact=exact,
            abs_error=abs_error,
            advertised_uncertainty=advertised,
            seed=args.seed,
            wall_ms=wall_ms,
            degenerate=degenerate,
        )
        print(row_to_json(row))
    return 0


def cmd_sweep(args) -> int:
    text = Path(args.config).read_text()
    config = parse_sweep_config(text)
    rows = run_sweep(config, timings=args.timings)
    print(result_header_line())
    for row in rows:
        print(row_to_json(row))
    return 0


def cmd_calibrate(args) -> int:
    examples = read_data_file(args.data)
    spec = _resolve_privacy(args)
    if len(examples) < 4:
        raise _UsageError("calibrate needs at least 4 examples")
    if not args.bbq and args.buckets is None:
        raise _UsageError("--buckets is required without --bbq")
    perm_ss, split_ss, pos_ss, neg_ss = np.random.SeedSequence((args.seed,)).spawn(4)
    scores, flags = as_arrays(examples)
    perm = as_generator(perm_ss).permutation(len(examples))
    half = len(examples) // 2
    cal_examples = [examples[i] for i in perm[:half]]
    eval_scores = scores[perm[half:]]
    eval_flags = flags[perm[half:]]
    shards = split_to_clients(cal_examples, args.split, split_ss)
    pos = build_hierarchy(shards, Label.POSITIVE, spec, pos_ss)
    neg = build_hierarchy(shards, Label.NEGATIVE, spec, neg_ss)
    if args.bbq:
        cal_map = calibrate_bbq(pos, neg, prior=args.prior)
    else:
        hist = build_score_histogram(pos, neg, args.buckets)
        cal_map = calibrate_histogram(hist, prior=args.prior)
    probs = apply_calibration_batch(cal_map, eval_scores)
    report = ece_arrays(probs, eval_flags, args.eval_bins)
    print(result_header_line())
    print(json.dumps({
        "calibration_map": {
            "weights": cal_map.weights.tolist(),
            "binnings": [
                {"boundaries": boundaries.tolist(), "values": values.tolist()}
                for boundaries, values in cal_map.binnings
            ],
        },
        "ece_report": {
            "num_bins": report.num_bins,
            "bin_mass": report.bin_mass.tolist(),
            "observed": report.observed.tolist(),
            "predicted": report.predicted.tolist(),
            "ece": report.ece,
        },
    }))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.func is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"fedeval: error: {exc}", file=sys.stderr)
        return 1
    except SweepConfigError as exc:
        print(f"fedeval: config error: {exc}", file=sys.stderr)
        return 1
    except DataFileError as exc:
        print(f"fedeval: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fedeval: i/o error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"fedeval: error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())
