"""Federated evaluation and calibration of binary classifiers.

Clients hold labeled scores; a server learns only aggregated
hierarchical count structures, under exact secure aggregation,
distributed discrete-Laplace noise, or local randomization. From those
structures the package builds equi-depth score histograms and computes
AUC, threshold metrics, and calibration maps with explicit uncertainty
accounting, plus an experiment harness and CLI for error-scaling
studies against exact centralized baselines.
"""

from .calibration import (
    CalibrationMap,
    EceReport,
    apply_calibration,
    apply_calibration_batch,
    bbq_weights,
    calibrate_bbq,
    calibrate_histogram,
    ece,
    ece_arrays,
)
from .core import (
    DegenerateEstimateError,
    InsufficientPopulationError,
    Label,
    LabeledScore,
    NoisyCount,
    PredictedExample,
    PrivacySpec,
    Regime,
    ScoreDistribution,
    Spike,
)
from .datagen import gen_well_behaved, split_to_clients
from .hierarchy import (
    HierarchicalCounts,
    ScoreHistogram,
    build_hierarchy,
    build_score_histogram,
    find_quantile,
    prefix_count,
)
from .io import DataFileError, read_data_file, write_data_file
from .mechanisms import (
    OueParams,
    PolyaShareParams,
    aggregated_noise,
    discrete_laplace_variance,
    distdp_noise_share,
    oue_aggregate,
    oue_decode,
    oue_encode,
    sample_polya,
    secure_aggregate,
)
from .metrics import AucEstimate, PraEstimate, auc_histogram, pra_fixed, pra_threshold
from .oracle import ExactMetrics, exact_auc, exact_metrics, exact_pra
from .sweep import (
    SweepConfig,
    SweepConfigError,
    SweepResultRow,
    parse_sweep_config,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AucEstimate",
    "CalibrationMap",
    "DataFileError",
    "DegenerateEstimateError",
    "EceReport",
    "ExactMetrics",
    "HierarchicalCounts",
    "InsufficientPopulationError",
    "Label",
    "LabeledScore",
    "NoisyCount",
    "OueParams",
    "PolyaShareParams",
    "PraEstimate",
    "PredictedExample",
    "PrivacySpec",
    "Regime",
    "ScoreDistribution",
    "ScoreHistogram",
    "Spike",
    "SweepConfig",
    "SweepConfigError",
    "SweepResultRow",
    "aggregated_noise",
    "apply_calibration",
    "apply_calibration_batch",
    "auc_histogram",
    "bbq_weights",
    "build_hierarchy",
    "build_score_histogram",
    "calibrate_bbq",
    "calibrate_histogram",
    "discrete_laplace_variance",
    "distdp_noise_share",
    "ece",
    "ece_arrays",
    "exact_auc",
    "exact_metrics",
    "exact_pra",
    "find_quantile",
    "gen_well_behaved",
    "oue_aggregate",
    "oue_decode",
    "oue_encode",
    "parse_sweep_config",
    "pra_fixed",
    "pra_threshold",
    "prefix_count",
    "read_data_file",
    "run_sweep",
    "sample_polya",
    "secure_aggregate",
    "split_to_clients",
    "write_data_file",
]
