"""Deterministic experiment sweeps over privacy regimes and grid knobs.

A sweep iterates the cross product of (regime, population size, bucket
count, height, epsilon) for several repetitions. Every cell derives its
own seed from the base seed and its coordinates, so results are
reproducible row by row and independent of execution order. Estimates
are compared against exact centralized metrics on the same data;
degenerate estimates are recorded rather than aborting the sweep.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calibration import apply_calibration_batch, calibrate_histogram, ece_arrays
from .core import (
    DegenerateEstimateError,
    InsufficientPopulationError,
    Label,
    LabeledScore,
    PrivacySpec,
    Regime,
    ScoreDistribution,
    Spike,
    as_arrays,
    as_generator,
)
from .datagen import gen_well_behaved, split_to_clients
from .hierarchy import build_hierarchy, build_score_histogram
from .metrics import auc_histogram, pra_threshold
from .oracle import _auc_from_arrays, exact_pra_curve

__all__ = [
    "SweepConfig",
    "SweepConfigError",
    "SweepResultRow",
    "parse_sweep_config",
    "run_sweep",
    "histogram_metric_records",
]

_REGIME_INDEX = {Regime.SECURE_AGG: 0, Regime.DIST_DP: 1, Regime.LOCAL_DP: 2}

PRA_METRICS = ("precision", "recall", "accuracy")


class SweepConfigError(ValueError):
    """A sweep config file had an unknown key or unusable value."""


@dataclass(frozen=True)
class SweepResultRow:
    metric: str
    regime: Regime
    num_examples: int
    num_buckets: int
    height: int
    epsilon: float | None
    threshold: float | None
    estimate: float | None
    exact: float | None
    abs_error: float | None
    advertised_uncertainty: float | None
    seed: int
    wall_ms: float | None
    degenerate: bool


@dataclass(frozen=True)
class SweepConfig:
    """Grid description for run_sweep.

    Empty grids are allowed and simply produce no rows. When data_path
    is set the population grid is replaced by the file's size.
    """

    base_seed: int
    regimes: tuple[Regime, ...] = ()
    num_examples: tuple[int, ...] = ()
    num_buckets: tuple[int, ...] = ()
    heights: tuple[int, ...] = ()
    epsilons: tuple[float, ...] = ()
    thresholds: tuple[float, ...] = ()
    repetitions: int = 1
    split_policy: str = "one_per_client"
    fanout: int = 2
    class_balance: float = 0.5
    distribution: ScoreDistribution = field(default_factory=ScoreDistribution)
    data_path: str | None = None
    tie_convention: str = "half"
    eval_bins: int = 20
    measure_ece: bool = True

    def __post_init__(self) -> None:
        if self.base_seed < 0:
            raise SweepConfigError("base_seed must be nonnegative")
        if self.repetitions < 0:
            raise SweepConfigError("repetitions must be nonnegative")
        if self.tie_convention not in ("half", "strict"):
            raise SweepConfigError(
                f"tie_convention must be 'half' or 'strict', "
                f"got {self.tie_convention!r}"
            )
        if self.eval_bins < 1:
            raise SweepConfigError("eval_bins must be at least 1")
        for eps in self.epsilons:
            if not eps > 0.0:
                raise SweepConfigError(f"epsilons must be positive, got {eps}")
        for t in self.thresholds:
            if not 0.0 <= t <= 1.0:
                raise SweepConfigError(f"thresholds must lie in [0, 1], got {t}")
        for m in self.num_examples:
            if m < 0:
                raise SweepConfigError("num_examples entries must be nonnegative")
        for b in self.num_buckets:
            if b < 1:
                raise SweepConfigError("num_buckets entries must be at least 1")
        for h in self.heights:
            if h < 1:
                raise SweepConfigError("heights entries must be at least 1")


def _float_bits(value: float | None) -> int:
    if value is None:
        return 0
    return int.from_bytes(struct.pack("<d", float(value)), "little")


def histogram_metric_records(
    hist,
    scores: np.ndarray,
    flags: np.ndarray,
    thresholds: Sequence[float],
    tie_convention: str = "half",
) -> list[tuple[str, float | None, float | None, float | None, float | None, bool]]:
    """(metric, threshold, estimate, exact, advertised, degenerate) tuples.

    One AUC record, then precision/recall/accuracy per threshold. Exact
    values come from the raw scores; a missing exact (single-class
    data, say) leaves that field None without marking the estimate
    degenerate.
    """
    records = []
    try:
        strict, half = _auc_from_arrays(scores, flags)
    except ValueError:
        strict = half = None
    exact_value = half if tie_convention == "half" else strict
    try:
        est = auc_histogram(hist)
        records.append(
            ("auc", None, est.value, exact_value, est.advertised_uncertainty, False)
        )
    except DegenerateEstimateError:
        records.append(("auc", None, None, exact_value, None, True))

    if thresholds:
        if scores.size:
            curve = exact_pra_curve(scores, flags, thresholds)
        else:
            curve = [(None, None, None)] * len(thresholds)
        for threshold, exact_triple in zip(thresholds, curve):
            try:
                est = pra_threshold(hist, threshold)
                values = (est.precision, est.recall, est.accuracy)
                slack = est.threshold_slack
            except DegenerateEstimateError:
                values = (None, None, None)
                slack = None
            for name, value, exact in zip(PRA_METRICS, values, exact_triple):
                records.append(
                    (name, threshold, value, exact, slack, value is None)
                )
    return records


def _degenerate_records(
    scores: np.ndarray,
    flags: np.ndarray,
    thresholds: Sequence[float],
    tie_convention: str,
    include_ece: bool,
) -> list[tuple]:
    """Record set for a cell whose aggregation could not run at all."""
    try:
        strict, half = _auc_from_arrays(scores, flags)
        exact_value = half if tie_convention == "half" else strict
    except ValueError:
        exact_value = None
    records: list[tuple] = [("auc", None, None, exact_value, None, True)]
    if thresholds and scores.size:
        curve = exact_pra_curve(scores, flags, thresholds)
    else:
        curve = [(None, None, None)] * len(thresholds)
    for threshold, exact_triple in zip(thresholds, curve):
        for name, exact in zip(PRA_METRICS, exact_triple):
            records.append((name, threshold, None, exact, None, True))
    if include_ece:
        records.append(("ece", None, None, None, None, True))
    return records


def _ece_record(
    examples: list[LabeledScore],
    scores: np.ndarray,
    flags: np.ndarray,
    spec: PrivacySpec,
    num_buckets: int,
    split_policy: str,
    eval_bins: int,
    calib_seed: np.random.SeedSequence,
) -> tuple:
    """Held-out calibration quality under this cell's regime.

    The data is shuffled and halved; a calibration map is fitted on
    aggregated counts of the first half and scored by ECE on the second.
    The exact reference repeats the pipeline with exact aggregation on
    the same halves, so for exact regimes the error is zero by
    construction.
    """
    if len(examples) < 4:
        return ("ece", None, None, None, None, True)
    perm_ss, split_ss, pos_ss, neg_ss = calib_seed.spawn(4)
    perm = as_generator(perm_ss).permutation(len(examples))
    half = len(examples) // 2
    cal_idx, eval_idx = perm[:half], perm[half:]
    cal_examples = [examples[i] for i in cal_idx]
    eval_scores = scores[eval_idx]
    eval_flags = flags[eval_idx]
    shards = split_to_clients(cal_examples, split_policy, split_ss)

    def held_out_ece(run_spec: PrivacySpec, pos_seed, neg_seed) -> float:
        pos = build_hierarchy(shards, Label.POSITIVE, run_spec, pos_seed)
        neg = build_hierarchy(shards, Label.NEGATIVE, run_spec, neg_seed)
        hist = build_score_histogram(pos, neg, num_buckets)
        cal_map = calibrate_histogram(hist)
        probs = apply_calibration_batch(cal_map, eval_scores)
        return ece_arrays(probs, eval_flags, eval_bins).ece

    try:
        estimate = held_out_ece(spec, pos_ss, neg_ss)
        if spec.regime is Regime.SECURE_AGG:
            exact = estimate
        else:
            exact_spec = PrivacySpec(
                regime=Regime.SECURE_AGG, height=spec.height, fanout=spec.fanout
            )
            exact = held_out_ece(exact_spec, None, None)
    except (InsufficientPopulationError, DegenerateEstimateError):
        return ("ece", None, None, None, None, True)
    return ("ece", None, estimate, exact, None, False)


def _abs_error(estimate: float | None, exact: float | None) -> float | None:
    if estimate is None or exact is None:
        return None
    return abs(estimate - exact)


def _run_cell(
    config: SweepConfig,
    regime: Regime,
    num_examples: int,
    num_buckets: int,
    height: int,
    epsilon: float | None,
    rep: int,
    file_examples: list[LabeledScore] | None,
    timings: bool,
) -> list[SweepResultRow]:
    entropy = (
        config.base_seed,
        _REGIME_INDEX[regime],
        num_examples,
        num_buckets,
        height,
        _float_bits(epsilon),
        rep,
    )
    root = np.random.SeedSequence(entropy)
    cell_seed = int(root.generate_state(1, np.uint64)[0])
    data_ss, split_ss, pos_ss, neg_ss, calib_ss = root.spawn(5)
    started = time.perf_counter()

    if file_examples is not None:
        examples = file_examples
    else:
        examples = gen_well_behaved(
            num_examples, config.distribution, config.class_balance, data_ss
        )
    scores, flags = as_arrays(examples)
    spec = PrivacySpec(
        regime=regime, epsilon=epsilon, height=height, fanout=config.fanout
    )
    try:
        shards = split_to_clients(examples, config.split_policy, split_ss)
        pos = build_hierarchy(shards, Label.POSITIVE, spec, pos_ss)
        neg = build_hierarchy(shards, Label.NEGATIVE, spec, neg_ss)
        hist = build_score_histogram(pos, neg, num_buckets)
    except InsufficientPopulationError:
        records = _degenerate_records(
            scores, flags, config.thresholds, config.tie_convention,
            config.measure_ece,
        )
    else:
        records = histogram_metric_records(
            hist, scores, flags, config.thresholds, config.tie_convention
        )
        if config.measure_ece:
            records.append(
                _ece_record(
                    examples, scores, flags, spec, num_buckets,
                    config.split_policy, config.eval_bins, calib_ss,
                )
            )

    wall_ms = (time.perf_counter() - started) * 1000.0 if timings else None
    return [
        SweepResultRow(
            metric=metric,
            regime=regime,
            num_examples=num_examples,
            num_buckets=num_buckets,
            height=height,
            epsilon=epsilon,
            threshold=threshold,
            estimate=estimate,
            exact=exact,
            abs_error=_abs_error(estimate, exact),
            advertised_uncertainty=advertised,
            seed=cell_seed,
            wall_ms=wall_ms,
            degenerate=degenerate,
        )
        for metric, threshold, estimate, exact, advertised, degenerate in records
    ]


def run_sweep(config: SweepConfig, timings: bool = False) -> list[SweepResultRow]:
    """All rows of the sweep grid, in deterministic order.

    Cells iterate regimes, then population sizes, bucket counts,
    heights, epsilons (exact aggregation takes a single None epsilon),
    then repetitions. Within a cell the rows are AUC, then
    precision/recall/accuracy per threshold, then ECE.
    """
    file_examples = None
    if config.data_path is not None:
        from .io import read_data_file

        file_examples = read_data_file(config.data_path)
        m_grid: tuple[int, ...] = (len(file_examples),)
    else:
        m_grid = config.num_examples

    rows = []
    for regime in config.regimes:
        eps_values: tuple[float | None, ...]
        if regime is Regime.SECURE_AGG:
            eps_values = (None,)
        else:
            eps_values = config.epsilons
        for num_examples in m_grid:
            for num_buckets in config.num_buckets:
                for height in config.heights:
                    for epsilon in eps_values:
                        for rep in range(config.repetitions):
                            rows.extend(
                                _run_cell(
                                    config, regime, num_examples, num_buckets,
                                    height, epsilon, rep, file_examples, timings,
                                )
                            )
    return rows


_LIST_KEYS = {
    "regimes": lambda v: Regime(v),
    "num_examples": int,
    "num_buckets": int,
    "heights": int,
    "epsilons": float,
    "thresholds": float,
}

_SCALAR_KEYS = {
    "repetitions": int,
    "base_seed": int,
    "fanout": int,
    "eval_bins": int,
    "split_policy": str,
    "tie_convention": str,
    "class_balance": float,
    "lipschitz": float,
    "pos_slope": float,
    "neg_slope": float,
    "spike_threshold": float,
    "data": str,
    "measure_ece": lambda v: {"true": True, "false": False}[v.lower()],
}


def _parse_spikes(value: str) -> tuple[Spike, ...]:
    spikes = []
    for chunk in value.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ValueError(f"spike {chunk!r} is not location:pos_mass:neg_mass")
        spikes.append(Spike(float(parts[0]), float(parts[1]), float(parts[2])))
    return tuple(spikes)


def parse_sweep_config(text: str) -> SweepConfig:
    """Parse 'key = value' sweep configs.

    Lists are comma separated; spikes are semicolon-separated
    location:pos_mass:neg_mass triples; '#' starts a comment. Unknown
    keys and unusable values raise SweepConfigError naming the key.
    """
    values: dict[str, object] = {}
    dist_kwargs: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise SweepConfigError(f"line {lineno}: expected 'key = value'")
        if key in values or key in dist_kwargs:
            raise SweepConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _LIST_KEYS:
                parse = _LIST_KEYS[key]
                items = [x.strip() for x in value.split(",")]
                values[key] = tuple(parse(x) for x in items if x)
            elif key == "spikes":
                dist_kwargs["spikes"] = _parse_spikes(value)
            elif key in ("lipschitz", "pos_slope", "neg_slope", "spike_threshold"):
                dist_kwargs[
                    {"pos_slope": "positive_slope", "neg_slope": "negative_slope"}.get(
                        key, key
                    )
                ] = float(value)
            elif key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](value)
            else:
                raise SweepConfigError(f"line {lineno}: unknown key {key!r}")
        except SweepConfigError:
            raise
        except (ValueError, KeyError) as exc:
            raise SweepConfigError(
                f"line {lineno}: bad value for key {key!r}: {exc}"
            ) from None
    if "base_seed" not in values:
        raise SweepConfigError("missing required key 'base_seed'")
    if "data" in values:
        values["data_path"] = values.pop("data")
    try:
        distribution = ScoreDistribution(**dist_kwargs)
        return SweepConfig(distribution=distribution, **values)
    except SweepConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise SweepConfigError(str(exc)) from None
