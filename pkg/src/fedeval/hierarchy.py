"""Hierarchical segment counts and quantile-based score histograms.

A hierarchy for one class population stores, for every level k in 1..h,
the counts of examples falling in each of the f**k uniform segments of
[0, 1]. Prefix counts over leaf cells decompose into at most (f-1)
segments per level, so any prefix needs few node reads; quantiles come
from a binary search over prefix counts, and equi-depth score histograms
from quantile boundaries plus prefix differences.

Counts are exact under secure aggregation, carry per-node discrete
Laplace noise under distributed DP, and are decoded unbiased frequency
estimates under local DP.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import (
    ClientShard,
    InsufficientPopulationError,
    Label,
    NoisyCount,
    PrivacySpec,
    Regime,
    as_generator,
    leaf_indices,
)
from .mechanisms import (
    OueParams,
    PolyaShareParams,
    aggregated_noise,
    discrete_laplace_variance,
)

__all__ = [
    "HierarchicalCounts",
    "ScoreHistogram",
    "build_hierarchy",
    "prefix_count",
    "find_quantile",
    "build_score_histogram",
]


def _ceil_log(value: int, base: int) -> int:
    """Smallest t >= 0 with base**t >= value, by integer arithmetic."""
    if value < 1:
        raise ValueError(f"value must be >= 1, got {value}")
    t = 0
    power = 1
    while power < value:
        power *= base
        t += 1
    return t


@dataclass(frozen=True, eq=False)
class HierarchicalCounts:
    """Per-level segment counts for one population.

    values[k-1] holds the f**k segment counts of level k; entries may be
    negative under noise. level_variances[k-1] is the advertised noise
    variance of a single level-k entry (0 under secure aggregation).
    """

    spec: PrivacySpec
    values: tuple[np.ndarray, ...]
    level_variances: tuple[float, ...]
    population_total: NoisyCount

    def __post_init__(self) -> None:
        if len(self.values) != self.spec.height:
            raise ValueError(
                f"expected {self.spec.height} levels, got {len(self.values)}"
            )
        if len(self.level_variances) != self.spec.height:
            raise ValueError("one variance per level is required")
        for k, arr in enumerate(self.values, start=1):
            if arr.shape != (self.spec.fanout**k,):
                raise ValueError(
                    f"level {k} must have {self.spec.fanout**k} entries, "
                    f"got shape {arr.shape}"
                )

    @property
    def height(self) -> int:
        return self.spec.height

    @property
    def fanout(self) -> int:
        return self.spec.fanout

    @property
    def num_leaves(self) -> int:
        return self.spec.num_leaves

    def level(self, k: int) -> np.ndarray:
        """Segment counts of level k (1-indexed)."""
        if not (1 <= k <= self.height):
            raise ValueError(f"level must be in [1, {self.height}], got {k}")
        return self.values[k - 1]

    def level_variance(self, k: int) -> float:
        if not (1 <= k <= self.height):
            raise ValueError(f"level must be in [1, {self.height}], got {k}")
        return self.level_variances[k - 1]

    def level_counts(self, k: int) -> tuple[NoisyCount, ...]:
        """Level-k entries as NoisyCount pairs."""
        var = self.level_variance(k)
        return tuple(NoisyCount(float(v), var) for v in self.level(k))

    def __add__(self, other: "HierarchicalCounts") -> "HierarchicalCounts":
        if not isinstance(other, HierarchicalCounts):
            return NotImplemented
        if self.spec != other.spec:
            raise ValueError("cannot add hierarchies built under different specs")
        values = tuple(a + b for a, b in zip(self.values, other.values))
        variances = tuple(
            a + b for a, b in zip(self.level_variances, other.level_variances)
        )
        total = NoisyCount(
            self.population_total.value + other.population_total.value,
            self.population_total.variance + other.population_total.variance,
        )
        return HierarchicalCounts(self.spec, values, variances, total)

    @cached_property
    def prefix_values(self) -> np.ndarray:
        """Estimated count of examples with leaf index < r, for r in 0..f**h.

        Each prefix [0, r) decomposes into one run of segments per level;
        the run at level k spans nodes f*(r // f**(h-k+1)) .. r // f**(h-k).
        Contributions are accumulated level by level in a fixed order, so
        scalar queries indexing this array and bulk queries agree bitwise.
        """
        f = self.fanout
        n = self.num_leaves
        r = np.arange(n + 1, dtype=np.int64)
        exact = all(arr.dtype.kind in "iu" for arr in self.values)
        out = np.zeros(n + 1, dtype=np.int64 if exact else np.float64)
        seg = n
        for k in range(1, self.height + 1):
            parent_seg = seg
            seg //= f
            level = self.values[k - 1]
            cum = np.concatenate(([level.dtype.type(0)], np.cumsum(level)))
            hi = r // seg
            # The top level has no stored parent, so its run starts at 0;
            # this also covers the full prefix r = f**h.
            lo = f * (r // parent_seg) if k > 1 else np.zeros_like(r)
            out += cum[hi] - cum[lo]
        return out

    @cached_property
    def prefix_variances(self) -> np.ndarray:
        """Advertised variance of each prefix estimate, for r in 0..f**h."""
        f = self.fanout
        n = self.num_leaves
        r = np.arange(n + 1, dtype=np.int64)
        out = np.zeros(n + 1, dtype=np.float64)
        seg = n
        for k in range(1, self.height + 1):
            parent_seg = seg
            seg //= f
            v = self.level_variances[k - 1]
            if v == 0.0:
                continue
            nodes_used = r // seg - (f * (r // parent_seg) if k > 1 else 0)
            out += nodes_used * v
        return out


@dataclass(frozen=True, eq=False)
class ScoreHistogram:
    """Equi-depth bucket counts over classifier scores.

    Buckets are delimited by leaf-aligned boundaries; bucket i covers the
    leaf range [boundary_leaves[i-1], boundary_leaves[i]) with the last
    bucket also holding score 1.0. Counts may be negative under noise;
    clamping is left to ratio-producing consumers.
    """

    spec: PrivacySpec
    boundary_leaves: np.ndarray
    pos_values: np.ndarray
    neg_values: np.ndarray
    pos_variances: np.ndarray
    neg_variances: np.ndarray
    pos_total: NoisyCount
    neg_total: NoisyCount

    def __post_init__(self) -> None:
        nb = len(self.boundary_leaves) - 1
        if nb < 1:
            raise ValueError("a histogram needs at least one bucket")
        if self.boundary_leaves[0] != 0 or self.boundary_leaves[-1] != self.spec.num_leaves:
            raise ValueError("boundaries must span the full leaf range")
        if np.any(np.diff(self.boundary_leaves) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        for arr in (self.pos_values, self.neg_values, self.pos_variances, self.neg_variances):
            if arr.shape != (nb,):
                raise ValueError("per-bucket arrays must match the bucket count")

    @property
    def num_buckets(self) -> int:
        return len(self.boundary_leaves) - 1

    @cached_property
    def boundaries(self) -> np.ndarray:
        """Bucket boundaries as reals in [0, 1], multiples of f**-h."""
        return self.boundary_leaves / self.spec.num_leaves

    def pos_counts(self) -> tuple[NoisyCount, ...]:
        return tuple(
            NoisyCount(float(v), float(w))
            for v, w in zip(self.pos_values, self.pos_variances)
        )

    def neg_counts(self) -> tuple[NoisyCount, ...]:
        return tuple(
            NoisyCount(float(v), float(w))
            for v, w in zip(self.neg_values, self.neg_variances)
        )


def _matching_leaves(
    shards: Sequence[ClientShard], class_filter: Label, spec: PrivacySpec
) -> np.ndarray:
    scores = np.fromiter(
        (
            example.score
            for shard in shards
            for example in shard
            if example.label is class_filter
        ),
        dtype=np.float64,
    )
    return leaf_indices(scores, spec.height, spec.fanout)


def _levels_from_leaves(leaf_counts: np.ndarray, spec: PrivacySpec) -> list[np.ndarray]:
    levels = [leaf_counts]
    for _ in range(spec.height - 1):
        levels.append(levels[-1].reshape(-1, spec.fanout).sum(axis=1))
    levels.reverse()
    return levels


def _build_exact(
    shards: Sequence[ClientShard], class_filter: Label, spec: PrivacySpec
) -> list[np.ndarray]:
    leaves = _matching_leaves(shards, class_filter, spec)
    leaf_counts = np.bincount(leaves, minlength=spec.num_leaves).astype(np.int64)
    return _levels_from_leaves(leaf_counts, spec)


def _build_local_dp(
    shards: Sequence[ClientShard], class_filter: Label, spec: PrivacySpec, rng
) -> tuple[list[np.ndarray], list[float]]:
    num_clients = len(shards)
    sizes = np.fromiter(
        (len(shard) for shard in shards), dtype=np.int64, count=num_clients
    )
    if np.any(sizes > 1):
        i = int(np.argmax(sizes > 1))
        raise ValueError(
            "local DP accepts at most one example per client shard, "
            f"shard {i} holds {sizes[i]}"
        )
    occupied = sizes == 1
    scores = np.fromiter(
        (shard[0].score for shard in shards if shard), dtype=np.float64
    )
    relevant = np.fromiter(
        (shard[0].label is class_filter for shard in shards if shard),
        dtype=bool,
    )
    leaf_of_client = np.full(num_clients, -1, dtype=np.int64)
    matches = np.zeros(num_clients, dtype=bool)
    leaf_of_client[occupied] = leaf_indices(scores, spec.height, spec.fanout)
    matches[occupied] = relevant

    # Group assignment is part of the mechanism randomness so that the
    # rescaled per-group counts stay unbiased for the full population.
    order = rng.permutation(num_clients)
    levels: list[np.ndarray] = []
    variances: list[float] = []
    for k in range(1, spec.height + 1):
        members = order[k - 1 :: spec.height]
        group_size = len(members)
        width = spec.fanout**k
        member_leaves = leaf_of_client[members]
        reporting = matches[members] & (member_leaves >= 0)
        nodes = member_leaves[reporting] // (spec.num_leaves // width)
        true_counts = np.bincount(nodes, minlength=width)
        # One OUE invocation per client covers both class structures as
        # the two halves of a doubled domain; bits are independent, so
        # each half is simulated directly from its bit-sum distribution.
        params = OueParams(spec.epsilon, 2 * width)
        p, q = params.p_keep, params.q_flip
        kept = rng.binomial(true_counts, p)
        flipped = rng.binomial(group_size - true_counts, q)
        scale = num_clients / group_size
        decoded = ((kept + flipped) - group_size * q) / (p - q) * scale
        levels.append(decoded)
        variances.append(scale**2 * group_size * q * (1.0 - q) / (p - q) ** 2)
    return levels, variances


def build_hierarchy(
    shards: Sequence[ClientShard],
    class_filter: Label,
    spec: PrivacySpec,
    seed=None,
) -> HierarchicalCounts:
    """Aggregate one class's per-level segment counts under a privacy regime.

    Every client participates at every level regardless of whether its
    examples match class_filter, so participation does not leak labels.
    Under local DP, clients are partitioned round-robin (over a seeded
    shuffle) into h groups and group k reports only its level-k segment;
    decoded counts are rescaled by the inverse sampling fraction.
    """
    if not isinstance(class_filter, Label):
        raise TypeError(f"class_filter must be a Label, got {class_filter!r}")
    num_clients = len(shards)
    rng = as_generator(seed)

    if spec.regime is Regime.LOCAL_DP:
        if num_clients == 0:
            levels = [
                np.zeros(spec.fanout**k, dtype=np.float64)
                for k in range(1, spec.height + 1)
            ]
            variances = [0.0] * spec.height
        elif num_clients < spec.height:
            raise InsufficientPopulationError(
                f"local DP needs at least {spec.height} clients to cover "
                f"all levels, got {num_clients}"
            )
        else:
            levels, variances = _build_local_dp(shards, class_filter, spec, rng)
    else:
        levels = _build_exact(shards, class_filter, spec)
        variances = [0.0] * spec.height
        if spec.regime is Regime.DIST_DP and num_clients > 0:
            params = PolyaShareParams.from_budget(
                spec.epsilon, spec.height, num_clients
            )
            node_variance = discrete_laplace_variance(params.alpha)
            for k in range(1, spec.height + 1):
                noise = aggregated_noise(
                    params, num_clients, rng, size=spec.fanout**k
                )
                levels[k - 1] = levels[k - 1] + noise
            variances = [node_variance] * spec.height

    total = NoisyCount(
        float(levels[0].sum()), spec.fanout * variances[0]
    )
    return HierarchicalCounts(
        spec=spec,
        values=tuple(levels),
        level_variances=tuple(variances),
        population_total=total,
    )


def prefix_count(counts: HierarchicalCounts, r) -> NoisyCount:
    """Estimated number of examples with leaf index < r, with variance."""
    r = operator.index(r)
    if not (0 <= r <= counts.num_leaves):
        raise ValueError(f"r must be in [0, {counts.num_leaves}], got {r}")
    return NoisyCount(
        float(counts.prefix_values[r]), float(counts.prefix_variances[r])
    )


def _quantile_leaf(prefix_values: np.ndarray, target: float) -> int:
    """Smallest leaf index r with prefix_values[r] >= target.

    Noisy prefixes may be non-monotone; the bisection then returns the
    crossing it converges to, without post-processing.
    """
    lo = 0
    hi = len(prefix_values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if prefix_values[mid] >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def find_quantile(counts: HierarchicalCounts, target_rank: float) -> float:
    """Leaf-aligned score boundary whose prefix count first reaches the rank.

    target_rank is clamped to [0, population total]; ties break toward
    the smaller boundary.
    """
    total = counts.population_total.value
    target = min(max(float(target_rank), 0.0), max(total, 0.0))
    r = _quantile_leaf(counts.prefix_values, target)
    return r / counts.num_leaves


def _bucket_variances(
    counts: HierarchicalCounts, boundary_leaves: np.ndarray
) -> np.ndarray:
    """Variance of each prefix-difference bucket count.

    Nodes shared by the two prefix decompositions cancel in the
    difference; the survivors are counted from the first level at which
    the two boundaries fall in different nodes.
    """
    num_buckets = len(boundary_leaves) - 1
    if all(v == 0.0 for v in counts.level_variances):
        return np.zeros(num_buckets, dtype=np.float64)
    f = counts.fanout
    h = counts.height
    node_idx = np.empty((h, num_buckets + 1), dtype=np.int64)
    nodes_used = np.empty((h, num_buckets + 1), dtype=np.int64)
    seg = counts.num_leaves
    for k in range(1, h + 1):
        parent_seg = seg
        seg //= f
        node_idx[k - 1] = boundary_leaves // seg
        nodes_used[k - 1] = node_idx[k - 1] - (
            f * (boundary_leaves // parent_seg) if k > 1 else 0
        )
    left_nodes = node_idx[:, :-1]
    right_nodes = node_idx[:, 1:]
    first_diverging = np.argmax(left_nodes != right_nodes, axis=0)
    left_used = nodes_used[:, :-1]
    right_used = nodes_used[:, 1:]
    level_of_row = np.arange(h)[:, None]
    weights = np.where(level_of_row > first_diverging[None, :], left_used + right_used, 0)
    cols = np.arange(num_buckets)
    weights[first_diverging, cols] = (
        right_used[first_diverging, cols] - left_used[first_diverging, cols]
    )
    level_vars = np.asarray(counts.level_variances, dtype=np.float64)
    return (weights * level_vars[:, None]).sum(axis=0)


def build_score_histogram(
    pos: HierarchicalCounts,
    neg: HierarchicalCounts,
    num_buckets: int,
    boundary_source: HierarchicalCounts | None = None,
) -> ScoreHistogram:
    """Equi-depth histogram over both classes from quantile boundaries.

    Boundaries are the B-quantiles of the combined population, then any
    bucket wider than f**(-ceil(log_f B) + 1) is split at aligned leaf
    boundaries so every bucket has width O(1/B). Duplicate quantiles are
    merged, so fewer than B buckets may come back; splitting produces at
    most B - 1 extra ones.

    boundary_source, when given, supplies the prefix counts used for the
    quantile search (for callers that budget boundary queries separately
    from bucket counts); bucket counts always come from pos and neg.
    """
    if num_buckets < 1:
        raise ValueError(f"num_buckets must be >= 1, got {num_buckets}")
    if pos.spec != neg.spec:
        raise ValueError("pos and neg hierarchies must share one privacy spec")
    combined = pos + neg
    source = combined if boundary_source is None else boundary_source
    if boundary_source is not None and boundary_source.spec != pos.spec:
        raise ValueError("boundary_source must share the histogram's privacy spec")

    n = pos.num_leaves
    total = source.population_total.value
    prefix_values = source.prefix_values
    cuts = {0, n}
    for j in range(1, num_buckets):
        target = min(max(j * total / num_buckets, 0.0), max(total, 0.0))
        cuts.add(_quantile_leaf(prefix_values, target))

    # Width cap: split any bucket wider than f**-cap_level at multiples
    # of the aligned leaf stride, keeping widths O(1/B).
    f = pos.fanout
    cap_level = min(pos.height, max(0, _ceil_log(num_buckets, f) - 1))
    stride = n // f**cap_level
    bounds = sorted(cuts)
    final: list[int] = [0]
    for left, right in zip(bounds, bounds[1:]):
        if right - left > stride:
            cursor = (left // stride + 1) * stride
            while cursor < right:
                final.append(cursor)
                cursor += stride
        final.append(right)
    boundary_leaves = np.asarray(final, dtype=np.int64)

    pos_values = np.diff(pos.prefix_values[boundary_leaves])
    neg_values = np.diff(neg.prefix_values[boundary_leaves])
    return ScoreHistogram(
        spec=pos.spec,
        boundary_leaves=boundary_leaves,
        pos_values=pos_values,
        neg_values=neg_values,
        pos_variances=_bucket_variances(pos, boundary_leaves),
        neg_variances=_bucket_variances(neg, boundary_leaves),
        pos_total=NoisyCount(
            float(pos.prefix_values[n]), pos.population_total.variance
        ),
        neg_total=NoisyCount(
            float(neg.prefix_values[n]), neg.population_total.variance
        ),
    )
