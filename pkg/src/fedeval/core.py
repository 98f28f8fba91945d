"""Core domain types shared across the package.

Scores live on the closed interval [0, 1]. Hierarchy operations discretize
a score to the leaf index floor(score * fanout**height); a score of exactly
1.0 is clamped into the last leaf so the mapping is total.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Label",
    "Regime",
    "LabeledScore",
    "ClientShard",
    "PredictedExample",
    "NoisyCount",
    "PrivacySpec",
    "Spike",
    "ScoreDistribution",
    "DegenerateEstimateError",
    "InsufficientPopulationError",
    "validate",
    "as_arrays",
    "leaf_indices",
    "as_generator",
]


class Label(enum.Enum):
    """Binary ground-truth class of an example."""

    NEGATIVE = 0
    POSITIVE = 1

    @classmethod
    def from_int(cls, value: int) -> "Label":
        if value == 0:
            return cls.NEGATIVE
        if value == 1:
            return cls.POSITIVE
        raise ValueError(f"label must be 0 or 1, got {value!r}")


class Regime(enum.Enum):
    """How client reports are aggregated.

    SECURE_AGG sums exact client vectors. DIST_DP adds distributed noise
    whose aggregate is two-sided geometric (discrete Laplace). LOCAL_DP
    randomizes each client report with optimized unary encoding.
    """

    SECURE_AGG = "secure_agg"
    DIST_DP = "dist_dp"
    LOCAL_DP = "local_dp"


class LabeledScore(NamedTuple):
    """One example: a classifier score in [0, 1] and its true label."""

    score: float
    label: Label


class PredictedExample(NamedTuple):
    """One example carrying a fixed binary prediction and its true label."""

    prediction: Label
    label: Label


# A client's local data. May be empty: such clients still participate in
# the aggregation protocols.
ClientShard = Sequence[LabeledScore]


class DegenerateEstimateError(RuntimeError):
    """Every requested ratio had a nonpositive (noisy) denominator.

    Carries the raw aggregated counters so callers can log or inspect them.
    """

    def __init__(self, message: str, counters: dict):
        super().__init__(message)
        self.counters = dict(counters)


class InsufficientPopulationError(ValueError):
    """Too few clients for the requested mechanism (e.g. fewer than h)."""


class NoisyCount(NamedTuple):
    """A count estimate together with the variance of its mechanism noise."""

    value: float
    variance: float = 0.0


@dataclass(frozen=True)
class PrivacySpec:
    """Mechanism parameters for one evaluation run.

    epsilon is the total privacy budget and must be absent for SECURE_AGG.
    height is the number of hierarchy levels; fanout the branching factor.
    """

    regime: Regime
    epsilon: float | None = None
    height: int = 10
    fanout: int = 2

    def __post_init__(self) -> None:
        if not isinstance(self.regime, Regime):
            raise ValueError(f"regime must be a Regime, got {self.regime!r}")
        if self.height < 1:
            raise ValueError(f"height must be >= 1, got {self.height}")
        if self.fanout < 2:
            raise ValueError(f"fanout must be >= 2, got {self.fanout}")
        if self.regime is Regime.SECURE_AGG:
            if self.epsilon is not None:
                raise ValueError("epsilon must be absent under secure aggregation")
        else:
            eps = self.epsilon
            if eps is None or not math.isfinite(eps) or eps <= 0.0:
                raise ValueError(f"epsilon must be a finite positive real, got {eps!r}")
        # Leaf arrays of every level must fit comfortably in memory.
        if self.num_leaves > (1 << 26):
            raise ValueError(
                f"fanout**height = {self.num_leaves} exceeds the supported resolution"
            )

    @property
    def num_leaves(self) -> int:
        return self.fanout**self.height


class Spike(NamedTuple):
    """A point mass in a synthetic score distribution.

    Masses are per-class fractions: positive_mass is the share of the
    positive class emitted exactly at location, likewise negative_mass.
    """

    location: float
    positive_mass: float
    negative_mass: float


@dataclass(frozen=True)
class ScoreDistribution:
    """Synthetic score distribution: point spikes plus a linear density.

    Outside the spikes each class draws from a density 1 + a*(x - 1/2) on
    [0, 1], where the slope a is bounded by min(lipschitz, 2) in magnitude
    (2 keeps the density nonnegative). By default the positive class slopes
    up and the negative class slopes down by that amount; per-class slopes
    can be overridden. spike_threshold records the mass above which a point
    is treated as an atom in analyses; it does not affect sampling.
    """

    spikes: tuple[Spike, ...] = ()
    lipschitz: float = 2.0
    spike_threshold: float = 0.01
    positive_slope: float | None = None
    negative_slope: float | None = None

    def __post_init__(self) -> None:
        if not (self.lipschitz >= 0.0):
            raise ValueError(f"lipschitz bound must be >= 0, got {self.lipschitz}")
        if not (0.0 < self.spike_threshold <= 1.0):
            raise ValueError(
                f"spike_threshold must lie in (0, 1], got {self.spike_threshold}"
            )
        pos_total = 0.0
        neg_total = 0.0
        for spike in self.spikes:
            if not (0.0 <= spike.location <= 1.0):
                raise ValueError(f"spike location {spike.location} outside [0, 1]")
            if spike.positive_mass < 0.0 or spike.negative_mass < 0.0:
                raise ValueError("spike masses must be nonnegative")
            pos_total += spike.positive_mass
            neg_total += spike.negative_mass
        if pos_total > 1.0 or neg_total > 1.0:
            raise ValueError(
                f"per-class spike masses must sum to at most 1, got "
                f"positive={pos_total}, negative={neg_total}"
            )
        limit = min(self.lipschitz, 2.0)
        for name, slope in (
            ("positive_slope", self.positive_slope),
            ("negative_slope", self.negative_slope),
        ):
            if slope is not None and abs(slope) > limit + 1e-12:
                raise ValueError(
                    f"{name}={slope} exceeds the allowed magnitude {limit}"
                )

    def class_slope(self, label: Label) -> float:
        limit = min(self.lipschitz, 2.0)
        if label is Label.POSITIVE:
            return limit if self.positive_slope is None else self.positive_slope
        return -limit if self.negative_slope is None else self.negative_slope

    def class_spike_mass(self, label: Label) -> float:
        if label is Label.POSITIVE:
            return sum(s.positive_mass for s in self.spikes)
        return sum(s.negative_mass for s in self.spikes)


def validate(example: LabeledScore) -> LabeledScore:
    """Check one example and return it unchanged.

    Rejects scores outside [0, 1] (NaN included) and non-Label labels.
    """
    score = example.score
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise ValueError(f"score must be a real number, got {score!r}")
    if not (0.0 <= score <= 1.0):  # NaN fails both comparisons
        raise ValueError(f"score must lie in [0, 1], got {score!r}")
    if not isinstance(example.label, Label):
        raise ValueError(f"label must be a Label, got {example.label!r}")
    return example


def as_arrays(examples: Sequence[LabeledScore]) -> tuple[np.ndarray, np.ndarray]:
    """Convert examples to (scores float64, labels bool) arrays."""
    count = len(examples)
    scores = np.fromiter((e.score for e in examples), dtype=np.float64, count=count)
    labels = np.fromiter(
        (e.label is Label.POSITIVE for e in examples), dtype=bool, count=count
    )
    return scores, labels


def leaf_indices(scores: np.ndarray, height: int, fanout: int) -> np.ndarray:
    """Map scores in [0, 1] to leaf indices in [0, fanout**height - 1]."""
    num_leaves = fanout**height
    idx = np.floor(np.asarray(scores, dtype=np.float64) * num_leaves).astype(np.int64)
    return np.clip(idx, 0, num_leaves - 1)


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
