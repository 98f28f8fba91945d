"""Synthetic score generation and client sharding.

Scores are drawn from a mixture of point masses (spikes) and a linear
density 1 + a(x - 1/2) on [0, 1], per class. With opposite class slopes
and a balanced mixture the combined score density is uniform, which
keeps equi-depth bucket widths flat and makes closed-form AUC values
easy to derive for tests.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import Label, LabeledScore, ScoreDistribution, as_generator

__all__ = ["gen_well_behaved", "split_to_clients"]


def _linear_inverse_cdf(slope: float, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of density 1 + slope*(x - 1/2) on [0, 1]."""
    if slope == 0.0:
        return u
    shift = 1.0 - slope / 2.0
    x = (-shift + np.sqrt(shift * shift + 2.0 * slope * u)) / slope
    return np.clip(x, 0.0, 1.0)


def _class_scores(
    dist: ScoreDistribution, label: Label, count: int, rng: np.random.Generator
) -> np.ndarray:
    masses = np.array(
        [
            spike.positive_mass if label is Label.POSITIVE else spike.negative_mass
            for spike in dist.spikes
        ],
        dtype=np.float64,
    )
    locations = np.array([spike.location for spike in dist.spikes])
    total_spike = float(masses.sum()) if masses.size else 0.0
    u = rng.random(count)
    out = np.empty(count, dtype=np.float64)
    if masses.size:
        cum = np.cumsum(masses)
        which = np.searchsorted(cum, u, side="right")
        smooth = which == masses.size
        spiked = ~smooth
        out[spiked] = locations[which[spiked]]
    else:
        smooth = np.ones(count, dtype=bool)
    if total_spike < 1.0:
        v = (u[smooth] - total_spike) / (1.0 - total_spike)
        out[smooth] = _linear_inverse_cdf(dist.class_slope(label), v)
    return out


def gen_well_behaved(
    num_examples: int,
    dist: ScoreDistribution,
    class_balance: float = 0.5,
    seed=None,
) -> list[LabeledScore]:
    """Sample labeled scores from a spike-plus-linear-density mixture.

    Each example's class is positive with probability class_balance;
    its score then comes from the class's spike locations with their
    stated masses, otherwise from the class's linear density.
    """
    if num_examples < 0:
        raise ValueError(f"num_examples must be nonnegative, got {num_examples}")
    if not 0.0 <= class_balance <= 1.0:
        raise ValueError(f"class_balance must be in [0, 1], got {class_balance}")
    rng = as_generator(seed)
    positive = rng.random(num_examples) < class_balance
    scores = np.empty(num_examples, dtype=np.float64)
    pos_count = int(positive.sum())
    scores[positive] = _class_scores(dist, Label.POSITIVE, pos_count, rng)
    scores[~positive] = _class_scores(
        dist, Label.NEGATIVE, num_examples - pos_count, rng
    )
    return [
        LabeledScore(float(s), Label.POSITIVE if flag else Label.NEGATIVE)
        for s, flag in zip(scores, positive)
    ]


def _split_skewed(
    examples: Sequence[LabeledScore], rho: float
) -> list[list[LabeledScore]]:
    """Concentrate a rho fraction of positives onto the first shards.

    Deterministic: with n examples there are n shards; ceil(rho * P)
    positives go round-robin onto the first ceil(rho * n) shards and
    everything else round-robin onto the rest.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"skew fraction must be in (0, 1], got {rho}")
    num_shards = len(examples)
    positives = [e for e in examples if e.label is Label.POSITIVE]
    negatives = [e for e in examples if e.label is Label.NEGATIVE]
    hot = min(num_shards, math.ceil(rho * num_shards))
    hot_pos = min(len(positives), math.ceil(rho * len(positives)))
    shards: list[list[LabeledScore]] = [[] for _ in range(num_shards)]
    for j, example in enumerate(positives[:hot_pos]):
        shards[j % hot].append(example)
    rest = positives[hot_pos:] + negatives
    cold = num_shards - hot
    for j, example in enumerate(rest):
        if cold > 0:
            shards[hot + j % cold].append(example)
        else:
            shards[j % num_shards].append(example)
    return shards


def _split_variable(
    examples: Sequence[LabeledScore], mean_size: float, rng: np.random.Generator
) -> list[list[LabeledScore]]:
    """Consecutive shards with geometric sizes of the given mean."""
    if mean_size < 1.0:
        raise ValueError(f"mean shard size must be at least 1, got {mean_size}")
    shards = []
    start = 0
    while start < len(examples):
        size = int(rng.geometric(1.0 / mean_size))
        size = min(size, len(examples) - start)
        shards.append(list(examples[start : start + size]))
        start += size
    return shards


def split_to_clients(
    examples: Sequence[LabeledScore], policy: str, seed=None
) -> list[list[LabeledScore]]:
    """Partition examples into client shards.

    Policies: "one_per_client"; "skewed:<rho>" concentrating positives
    onto a rho fraction of shards; "variable:<mean>" with geometric
    shard sizes. The union of shards is always exactly the input.
    """
    if policy == "one_per_client":
        return [[example] for example in examples]
    name, _, arg = policy.partition(":")
    if name in ("skewed", "variable"):
        if len(examples) == 0:
            raise ValueError(f"policy {policy!r} needs at least one example")
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"policy {policy!r} needs a numeric parameter") from None
        if name == "skewed":
            return _split_skewed(examples, value)
        return _split_variable(examples, value, as_generator(seed))
    raise ValueError(f"unknown split policy {policy!r}")
