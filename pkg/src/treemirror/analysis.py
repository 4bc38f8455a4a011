"""Fidelity metrics and dependence audits of a blackbox via its mirror tree.

The audits answer, with Monte-Carlo estimates under the fitted input
mixture: how much does the blackbox response move when an audited feature
flips (overall effect), how strong is that dependence inside the subgroup
that reaches a given tree node (subgroup effect), and what fraction of the
test population lives in that subgroup.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BoxConstraint, DecisionTree, Split
from .errors import DegenerateConditioning, DomainError, ZeroMassRegion
from .gmm import DiagonalGMM, sample_conditional

# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FidelityReport:
    """Agreement with the blackbox plus an optional ground-truth metric.

    ``relative`` is the agreement fraction for classification and the mean
    squared difference for regression. ``absolute`` compares against true
    labels when they are supplied (macro F1 / MSE).
    """

    task: str
    n_test: int
    relative: float
    relative_metric: str
    absolute: float | None = None
    absolute_metric: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "n_test": self.n_test,
            "relative": self.relative,
            "relative_metric": self.relative_metric,
            "absolute": self.absolute,
            "absolute_metric": self.absolute_metric,
        }


def macro_f1(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Unweighted mean of per-class F1 scores over the union of classes."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    classes = np.union1d(predicted, truth)
    scores = []
    for c in classes:
        tp = int(np.sum((predicted == c) & (truth == c)))
        fp = int(np.sum((predicted == c) & (truth != c)))
        fn = int(np.sum((predicted != c) & (truth == c)))
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def fidelity(
    surrogate,
    oracle,
    X_test: np.ndarray,
    y_true: np.ndarray | None = None,
) -> FidelityReport:
    """Score the surrogate against the blackbox on a held-out test set."""
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_test.ndim != 2 or X_test.shape[0] == 0:
        raise DomainError("fidelity needs a non-empty 2-D test set")
    t_pred = np.asarray(surrogate.predict(X_test))
    f_pred = np.asarray(oracle.predict(X_test))
    task = oracle.task
    if task == "classification":
        relative = float(np.mean(t_pred == f_pred))
        relative_metric = "agreement"
    else:
        diff = t_pred.astype(np.float64) - f_pred.astype(np.float64)
        relative = float(np.mean(diff * diff))
        relative_metric = "mse"
    absolute = None
    absolute_metric = None
    if y_true is not None:
        y_true = np.asarray(y_true)
        if task == "classification":
            absolute = macro_f1(t_pred, y_true)
            absolute_metric = "f1_macro"
        else:
            diff = t_pred.astype(np.float64) - y_true.astype(np.float64)
            absolute = float(np.mean(diff * diff))
            absolute_metric = "mse"
    return FidelityReport(
        task=task,
        n_test=X_test.shape[0],
        relative=relative,
        relative_metric=relative_metric,
        absolute=absolute,
        absolute_metric=absolute_metric,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo conditional expectations
# ---------------------------------------------------------------------------


def _region_seed(seed: int, box: BoxConstraint) -> np.random.SeedSequence:
    """Seed derived from the region itself, not the call order.

    Swapping the two sides of an effect estimate must swap the exact sample
    streams, so the estimate is exactly antisymmetric.
    """
    h = hashlib.blake2b(digest_size=16)
    h.update(np.asarray(box.lower, dtype=np.float64).tobytes())
    h.update(np.asarray(box.upper, dtype=np.float64).tobytes())
    h.update(np.asarray(box.lower_strict, dtype=np.uint8).tobytes())
    digest = int.from_bytes(h.digest(), "big")
    return np.random.SeedSequence(entropy=(seed, digest))


def _response(oracle, X: np.ndarray, effect_class: int | None) -> np.ndarray:
    y = np.asarray(oracle.predict(X))
    if oracle.task == "classification" and effect_class is not None:
        return (y == effect_class).astype(np.float64)
    return y.astype(np.float64)


def _conditional_mean(
    oracle,
    g: DiagonalGMM,
    box: BoxConstraint,
    n: int,
    seed: int,
    effect_class: int | None,
) -> tuple[float, float]:
    try:
        X = sample_conditional(g, box, n, _region_seed(seed, box))
    except ZeroMassRegion as exc:
        raise DegenerateConditioning(
            f"no probability mass in the conditioning region: {box.describe()}"
        ) from exc
    resp = _response(oracle, X, effect_class)
    mean = float(np.mean(resp))
    se = float(np.std(resp) / math.sqrt(n))
    return mean, se


@dataclass(frozen=True)
class EffectEstimate:
    """Monte-Carlo difference of conditional response means, with its SE."""

    delta: float
    se: float
    n_per_side: int
    high_mean: float
    low_mean: float

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "se": self.se,
            "n_per_side": self.n_per_side,
            "high_mean": self.high_mean,
            "low_mean": self.low_mean,
        }


def _side_box(
    g: DiagonalGMM, feature: int, side: float | tuple[float, float]
) -> BoxConstraint:
    box = BoxConstraint.full(g.dimension)
    if isinstance(side, tuple):
        lo, hi = side
    elif side == 0:
        lo, hi = -math.inf, 0.5
    elif side == 1:
        lo, hi = 0.5, math.inf
    else:
        raise DomainError(
            "side values must be 0/1 for indicator features or an interval pair"
        )
    intervals = [
        (lo, hi) if i == feature else (-math.inf, math.inf)
        for i in range(g.dimension)
    ]
    return BoxConstraint.from_intervals(intervals)


def feature_effect(
    oracle,
    g: DiagonalGMM,
    feature: int,
    v_low: float | tuple[float, float] = 0,
    v_high: float | tuple[float, float] = 1,
    n: int = 10_000,
    seed: int = 0,
    effect_class: int | None = None,
) -> EffectEstimate:
    """Overall response shift between the high and low regions of a feature.

    Indicator features condition on the halves split at 0.5; numeric
    features take explicit (lower, upper) interval pairs. Classification
    responses are the probability of ``effect_class`` when given, otherwise
    the expected numeric label value.
    """
    if not 0 <= feature < g.dimension:
        raise DomainError(f"feature index {feature} out of range")
    if n < 2:
        raise DomainError("effect estimation needs at least 2 samples per side")
    high_box = _side_box(g, feature, v_high)
    low_box = _side_box(g, feature, v_low)
    high_mean, high_se = _conditional_mean(oracle, g, high_box, n, seed, effect_class)
    low_mean, low_se = _conditional_mean(oracle, g, low_box, n, seed, effect_class)
    return EffectEstimate(
        delta=high_mean - low_mean,
        se=math.hypot(high_se, low_se),
        n_per_side=n,
        high_mean=high_mean,
        low_mean=low_mean,
    )


@dataclass(frozen=True)
class SubgroupEffect:
    """Per-node effect: response gap between the two children, and prevalence."""

    node: int
    delta_n: float
    se: float
    prevalence: float  # P: fraction of test points reaching the node
    test_count: int
    n_test: int

    def to_json_dict(self) -> dict:
        return {
            "node": self.node,
            "delta_n": self.delta_n,
            "se": self.se,
            "prevalence": self.prevalence,
            "test_count": self.test_count,
            "n_test": self.n_test,
        }


def subgroup_effect(
    oracle,
    g: DiagonalGMM,
    tree: DecisionTree,
    node: int,
    X_test: np.ndarray,
    n: int = 10_000,
    seed: int = 0,
    effect_class: int | None = None,
) -> SubgroupEffect:
    """Effect size inside the subgroup that flows to an internal node.

    The gap is E[response | left child region] - E[response | right child
    region]; prevalence is the normalized count of test points whose path
    reaches the node.
    """
    tree._check_node(node)
    split = tree.nodes[node]
    if not isinstance(split, Split):
        raise DomainError(f"node {node} is a leaf; subgroup effects need a branch")
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_test.ndim != 2 or X_test.shape[0] == 0:
        raise DomainError("subgroup prevalence needs a non-empty test set")
    left_box = tree.path_constraint(split.left)
    right_box = tree.path_constraint(split.right)
    left_mean, left_se = _conditional_mean(oracle, g, left_box, n, seed, effect_class)
    right_mean, right_se = _conditional_mean(oracle, g, right_box, n, seed, effect_class)
    node_box = tree.path_constraint(node)
    count = int(np.sum(node_box.contains_batch(X_test)))
    return SubgroupEffect(
        node=int(node),
        delta_n=left_mean - right_mean,
        se=math.hypot(left_se, right_se),
        prevalence=count / X_test.shape[0],
        test_count=count,
        n_test=X_test.shape[0],
    )


@dataclass(frozen=True)
class DependenceReport:
    """Overall effect of a feature plus the per-node subgroup breakdown."""

    feature: int
    feature_name: str
    overall: EffectEstimate
    entries: tuple[dict, ...]  # node, depth, delta_n, se, prevalence, share

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature,
            "feature_name": self.feature_name,
            "overall": self.overall.to_json_dict(),
            "entries": list(self.entries),
        }


def dependence_report(
    oracle,
    g: DiagonalGMM,
    tree: DecisionTree,
    feature: int,
    X_test: np.ndarray,
    n: int = 10_000,
    seed: int = 0,
    effect_class: int | None = None,
    v_low: float | tuple[float, float] = 0,
    v_high: float | tuple[float, float] = 1,
) -> DependenceReport:
    """Audit one feature: overall effect and every node branching on it."""
    overall = feature_effect(
        oracle, g, feature, v_low, v_high, n=n, seed=seed, effect_class=effect_class
    )
    entries = []
    for node_id in tree.internal_ids():
        split = tree.nodes[node_id]
        assert isinstance(split, Split)
        if split.feature != feature:
            continue
        sub = subgroup_effect(
            oracle, g, tree, node_id, X_test, n=n, seed=seed, effect_class=effect_class
        )
        share = (
            sub.prevalence * sub.delta_n / overall.delta if overall.delta != 0 else math.nan
        )
        entries.append(
            {
                "node": sub.node,
                "depth": tree.depth_of(node_id),
                "delta_n": sub.delta_n,
                "se": sub.se,
                "prevalence": sub.prevalence,
                "test_count": sub.test_count,
                "share": share,
            }
        )
    name = tree.feature_names[feature]
    return DependenceReport(
        feature=feature, feature_name=name, overall=overall, entries=tuple(entries)
    )


# ---------------------------------------------------------------------------
# occurrence and model comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OccurrenceReport:
    """Where a feature shows up across a batch of extracted trees."""

    feature: int
    per_tree: tuple[dict, ...]  # {occurs, min_depth}
    n_trees: int
    n_occurring: int
    n_at_root: int

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature,
            "per_tree": list(self.per_tree),
            "n_trees": self.n_trees,
            "n_occurring": self.n_occurring,
            "n_at_root": self.n_at_root,
        }


def occurrence_report(trees: Sequence[DecisionTree], feature: int) -> OccurrenceReport:
    """Per-tree occurrence and shallowest depth of one feature."""
    if trees and any(t.feature_names != trees[0].feature_names for t in trees):
        raise DomainError("occurrence reports need trees over one feature space")
    per_tree = []
    for tree in trees:
        depths = [
            tree.depth_of(i)
            for i in tree.internal_ids()
            if tree.nodes[i].feature == feature  # type: ignore[union-attr]
        ]
        per_tree.append(
            {"occurs": bool(depths), "min_depth": min(depths) if depths else None}
        )
    occurring = [e for e in per_tree if e["occurs"]]
    return OccurrenceReport(
        feature=feature,
        per_tree=tuple(per_tree),
        n_trees=len(per_tree),
        n_occurring=len(occurring),
        n_at_root=sum(1 for e in occurring if e["min_depth"] == 0),
    )


@dataclass(frozen=True)
class ModelComparison:
    """Side-by-side view of several models through their mirror trees."""

    rows: tuple[dict, ...]  # tag, top_features, relative, absolute
    shared_features: tuple[str, ...]
    distinct_features: dict[str, tuple[str, ...]] = field(compare=False)
    threshold_ranges: dict[str, tuple[float, float]] = field(compare=False)
    flagged_features: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "rows": list(self.rows),
            "shared_features": list(self.shared_features),
            "distinct_features": {k: list(v) for k, v in self.distinct_features.items()},
            "threshold_ranges": {k: list(v) for k, v in self.threshold_ranges.items()},
            "flagged_features": list(self.flagged_features),
        }


TOP_LEVELS = 3  # compare the first three tree levels, depths 0..2


def compare_models(
    entries: Sequence[tuple[str, DecisionTree, FidelityReport]],
) -> ModelComparison:
    """Contrast the top levels of several mirror trees of the same data.

    Features used exclusively by the weaker half of the models (by absolute
    score when present, else relative) are flagged as suspects for why
    those models underperform.
    """
    if len(entries) < 2:
        raise DomainError("model comparison needs at least two entries")
    names = entries[0][1].feature_names
    if any(tree.feature_names != names for _, tree, _ in entries):
        raise DomainError("model comparison needs trees over one feature space")

    rows = []
    top_features: dict[str, set[str]] = {}
    thresholds: dict[str, list[float]] = {}
    for tag, tree, report in entries:
        used = set()
        for node_id in tree.internal_ids():
            if tree.depth_of(node_id) >= TOP_LEVELS:
                continue
            split = tree.nodes[node_id]
            assert isinstance(split, Split)
            fname = names[split.feature]
            used.add(fname)
            thresholds.setdefault(fname, []).append(split.threshold)
        top_features[tag] = used
        rows.append(
            {
                "tag": tag,
                "top_features": sorted(used),
                "relative": report.relative,
                "absolute": report.absolute,
            }
        )

    all_tags = [tag for tag, _, _ in entries]
    shared = set.intersection(*(top_features[t] for t in all_tags))
    distinct = {
        tag: tuple(sorted(top_features[tag] - set().union(
            *(top_features[o] for o in all_tags if o != tag)
        )))
        for tag in all_tags
    }
    ranges = {
        fname: (min(vals), max(vals))
        for fname, vals in sorted(thresholds.items())
        if fname in shared
    }

    # Features seen only in the weaker half of the models are suspects.
    # Rank on the absolute metric only when every entry carries one, so the
    # ordering never mixes two different scales.
    use_absolute = all(report.absolute is not None for _, _, report in entries)

    def score(entry):
        _, _, report = entry
        return report.absolute if use_absolute else report.relative

    ordered = sorted(entries, key=score)
    half = len(ordered) // 2
    weak = {tag for tag, _, _ in ordered[:half]}
    strong_features = set().union(
        *(top_features[t] for t in all_tags if t not in weak)
    ) if len(weak) < len(all_tags) else set()
    weak_only = set().union(*(top_features[t] for t in weak)) - strong_features if weak else set()

    return ModelComparison(
        rows=tuple(rows),
        shared_features=tuple(sorted(shared)),
        distinct_features=distinct,
        threshold_ranges=ranges,
        flagged_features=tuple(sorted(weak_only)),
    )
