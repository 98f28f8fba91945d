"""Grid sweeps: configuration parsing, row emission, and determinism."""

import numpy as np
import pytest

from fedeval import Regime
from fedeval.io import write_data_file
from fedeval.sweep import (
    SweepConfig,
    SweepConfigError,
    parse_sweep_config,
    run_sweep,
)

BASIC_CONFIG = """
# A tiny two-regime grid.
base_seed = 42
regimes = secure_agg, dist_dp
num_examples = 200
num_buckets = 5
heights = 4
epsilons = 1.0
thresholds = 0.3, 0.6
repetitions = 2
split_policy = one_per_client
class_balance = 0.5
eval_bins = 10
"""


def test_parse_basic_config():
    config = parse_sweep_config(BASIC_CONFIG)
    assert config.base_seed == 42
    assert config.regimes == (Regime.SECURE_AGG, Regime.DIST_DP)
    assert config.num_examples == (200,)
    assert config.num_buckets == (5,)
    assert config.heights == (4,)
    assert config.epsilons == (1.0,)
    assert config.thresholds == (0.3, 0.6)
    assert config.repetitions == 2
    assert config.eval_bins == 10
    assert config.measure_ece is True
    assert config.data_path is None


def test_parse_distribution_keys():
    config = parse_sweep_config(
        """
        base_seed = 1
        lipschitz = 1.5
        pos_slope = 1.0
        neg_slope = -0.5
        spikes = 0.25:0.3:0.0; 0.75:0.0:0.2
        """
    )
    dist = config.distribution
    assert dist.lipschitz == 1.5
    assert dist.positive_slope == 1.0
    assert dist.negative_slope == -0.5
    assert len(dist.spikes) == 2
    assert dist.spikes[0].location == 0.25


@pytest.mark.parametrize(
    "text,needle",
    [
        ("base_seed = 1\nwidgets = 3\n", "widgets"),
        ("base_seed = 1\nbase_seed = 2\n", "duplicate"),
        ("regimes = secure_agg\n", "base_seed"),
        ("base_seed = 1\nregimes = banana\n", "regimes"),
        ("base_seed = 1\nnum_buckets = 0\n", "num_buckets"),
        ("base_seed = 1\nepsilons = -1\n", "epsilons"),
        ("base_seed = 1\nthresholds = 2.0\n", "thresholds"),
        ("base_seed = 1\njust a line\n", "key = value"),
        ("base_seed = 1\ntie_convention = maybe\n", "tie_convention"),
    ],
)
def test_parse_errors_name_the_problem(text, needle):
    with pytest.raises(SweepConfigError, match=needle):
        parse_sweep_config(text)


def test_empty_grid_produces_no_rows():
    config = SweepConfig(base_seed=1)
    assert run_sweep(config) == []


def tiny_config(**overrides):
    base = dict(
        base_seed=42,
        regimes=(Regime.SECURE_AGG,),
        num_examples=(200,),
        num_buckets=(5,),
        heights=(4,),
        thresholds=(0.3, 0.6),
        repetitions=2,
        eval_bins=10,
    )
    base.update(overrides)
    return SweepConfig(**base)


def test_row_cardinality_and_order():
    rows = run_sweep(tiny_config())
    # Each repetition: one AUC row, three P/R/A rows per threshold, one ECE.
    assert len(rows) == 2 * (1 + 2 * 3 + 1)
    per_cell = [
        ("auc", None),
        ("precision", 0.3),
        ("recall", 0.3),
        ("accuracy", 0.3),
        ("precision", 0.6),
        ("recall", 0.6),
        ("accuracy", 0.6),
        ("ece", None),
    ]
    observed = [(r.metric, r.threshold) for r in rows]
    assert observed == per_cell * 2
    for row in rows:
        assert row.regime is Regime.SECURE_AGG
        assert row.num_examples == 200
        assert row.num_buckets == 5
        assert row.height == 4
        assert row.epsilon is None
        assert row.wall_ms is None
        assert not row.degenerate
        assert row.abs_error is not None


def test_rows_are_deterministic():
    first = run_sweep(tiny_config())
    second = run_sweep(tiny_config())
    assert first == second
    timed = run_sweep(tiny_config(), timings=True)
    assert all(r.wall_ms is not None for r in timed)
    stripped = [
        (r.metric, r.threshold, r.estimate, r.exact, r.seed) for r in timed
    ]
    assert stripped == [
        (r.metric, r.threshold, r.estimate, r.exact, r.seed) for r in first
    ]


def test_cell_seeds_differ_per_repetition():
    rows = run_sweep(tiny_config())
    seeds = {r.seed for r in rows}
    assert len(seeds) == 2


def test_secure_agg_ece_exact_matches_estimate():
    rows = run_sweep(tiny_config())
    ece_rows = [r for r in rows if r.metric == "ece"]
    assert len(ece_rows) == 2
    for row in ece_rows:
        assert row.exact == row.estimate
        assert row.abs_error == 0.0


def test_epsilon_grid_under_secure_agg_collapses():
    config = tiny_config(epsilons=(0.5, 1.0), repetitions=1, thresholds=())
    rows = run_sweep(config)
    # secure_agg ignores the epsilon grid entirely.
    assert len(rows) == 2
    assert all(r.epsilon is None for r in rows)

    dp = tiny_config(
        regimes=(Regime.DIST_DP,),
        epsilons=(0.5, 1.0),
        repetitions=1,
        thresholds=(),
    )
    dp_rows = run_sweep(dp)
    assert [r.epsilon for r in dp_rows] == [0.5, 0.5, 1.0, 1.0]


def test_local_dp_with_tiny_population_degenerates():
    config = tiny_config(
        regimes=(Regime.LOCAL_DP,),
        num_examples=(5,),
        heights=(10,),
        epsilons=(5.0,),
        repetitions=1,
    )
    rows = run_sweep(config)
    assert len(rows) == 8
    for row in rows:
        assert row.degenerate
        assert row.estimate is None
        assert row.abs_error is None
    # Exact references still come from the raw sample where defined.
    auc_row = rows[0]
    assert auc_row.metric == "auc"
    assert auc_row.exact is not None


def test_data_file_overrides_generation(tmp_path):
    from fedeval import Label, LabeledScore

    rng = np.random.default_rng(0)
    examples = [
        LabeledScore(float(s), Label.POSITIVE if i % 3 else Label.NEGATIVE)
        for i, s in enumerate(rng.random(60))
    ]
    path = tmp_path / "data.csv"
    write_data_file(path, examples)
    config = tiny_config(
        data_path=str(path), num_examples=(999,), repetitions=1
    )
    rows = run_sweep(config)
    assert all(r.num_examples == 60 for r in rows)


def test_measure_ece_off_drops_rows():
    rows = run_sweep(tiny_config(measure_ece=False, repetitions=1))
    assert all(r.metric != "ece" for r in rows)
    assert len(rows) == 7


def test_config_validation():
    with pytest.raises(SweepConfigError):
        SweepConfig(base_seed=-1)
    with pytest.raises(SweepConfigError):
        SweepConfig(base_seed=1, tie_convention="sometimes")
    with pytest.raises(SweepConfigError):
        SweepConfig(base_seed=1, thresholds=(1.5,))
    with pytest.raises(SweepConfigError):
        SweepConfig(base_seed=1, heights=(0,))
    with pytest.raises(SweepConfigError):
        SweepConfig(base_seed=1, eval_bins=0)
