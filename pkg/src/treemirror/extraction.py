"""Greedy tree construction: blackbox extraction, CART baseline, bagged forest.

The extractor grows a tree best-first under a node budget. Every leaf is
scored by drawing a fresh conditioned sample from the input mixture,
labelling it with one batched oracle call, and scanning every (feature,
midpoint) split candidate exhaustively; the frontier leaf with the highest
estimated gain is expanded next. The CART baseline runs the identical scan
on a fixed labelled training set instead of resampling.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np

from .core import (
    BINARY_THRESHOLD,
    BoxConstraint,
    DecisionTree,
    GT,
    LEQ,
    Leaf,
    Node,
    Split,
)
from .errors import DomainError, OracleError, OracleSessionError, ZeroMassRegion
from .gmm import DiagonalGMM, SeedLike, sample_conditional

LabelValue = Union[int, float]


@dataclass(frozen=True)
class ExtractionConfig:
    """Knobs of the extractor; ``node_budget`` counts every tree node."""

    node_budget: int = 31
    samples_per_node: int = 10_000
    seed: int = 0
    task: str = "classification"
    min_gain: float = 1e-7
    max_depth: int = 64
    binary_features: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.node_budget < 1:
            raise DomainError("node budget must be at least 1")
        if self.samples_per_node < 2:
            raise DomainError("need at least 2 samples per node")
        if self.task not in ("classification", "regression"):
            raise DomainError(f"unknown task {self.task!r}")
        if self.min_gain < 0:
            raise DomainError("min gain must be nonnegative")
        if self.max_depth < 1:
            raise DomainError("max depth must be at least 1")

    @property
    def effective_budget(self) -> int:
        # binary trees have odd node counts; an even budget cannot be filled
        return self.node_budget if self.node_budget % 2 == 1 else self.node_budget - 1


@dataclass(frozen=True)
class LabeledSample:
    """Sampled points plus their oracle labels."""

    X: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class LabelSummary:
    """Leaf-label statistics of one side of a split (or of a whole node)."""

    label: LabelValue
    count: int
    distribution: dict[int, int] | None = None


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    gain: float
    left: LabelSummary
    right: LabelSummary


# ---------------------------------------------------------------------------
# impurity and the split scan
# ---------------------------------------------------------------------------


def impurity(labels, task: str) -> float:
    """Gini impurity of class labels, or variance of regression labels."""
    if task == "classification":
        if isinstance(labels, dict):
            counts = np.asarray(list(labels.values()), dtype=np.float64)
        else:
            arr = np.asarray(labels)
            if arr.size == 0:
                raise DomainError("impurity of an empty distribution is undefined")
            _, counts = np.unique(arr, return_counts=True)
            counts = counts.astype(np.float64)
        total = counts.sum()
        if total <= 0:
            raise DomainError("impurity of an empty distribution is undefined")
        p = counts / total
        return float(1.0 - np.sum(p * p))
    if task == "regression":
        arr = np.asarray(labels, dtype=np.float64)
        if arr.size == 0:
            raise DomainError("impurity of an empty distribution is undefined")
        return float(np.var(arr))
    raise DomainError(f"unknown task {task!r}")


def _summarize(y: np.ndarray, task: str) -> LabelSummary:
    if task == "classification":
        values, counts = np.unique(y, return_counts=True)
        best = int(np.argmax(counts))
        dist = {int(v): int(c) for v, c in zip(values, counts)}
        return LabelSummary(label=int(values[best]), count=int(y.size), distribution=dist)
    return LabelSummary(label=float(np.mean(y)), count=int(y.size))


def _summary_from_counts(
    classes: np.ndarray, counts: np.ndarray
) -> LabelSummary:
    best = int(np.argmax(counts))
    dist = {int(v): int(c) for v, c in zip(classes, counts) if c > 0}
    return LabelSummary(
        label=int(classes[best]), count=int(counts.sum()), distribution=dist
    )


def best_split(
    sample: LabeledSample,
    task: str,
    min_gain: float = 0.0,
    binary_features: Sequence[int] = (),
) -> SplitCandidate | None:
    """Exhaustive scan over features and midpoints of consecutive values.

    Gain is parent impurity minus size-weighted child impurities, estimated
    on the sample itself. Binary-indicator features admit only the 0.5 cut.
    Returns ``None`` when no candidate beats ``min_gain`` or the sample is
    degenerate.
    """
    X = np.asarray(sample.X, dtype=np.float64)
    y = np.asarray(sample.y)
    n = y.size
    if n < 2:
        return None
    binary = frozenset(binary_features)

    if task == "classification":
        classes, y_idx = np.unique(y, return_inverse=True)
        m = classes.size
        if m == 1:
            return None
        total_counts = np.bincount(y_idx, minlength=m).astype(np.float64)
        parent = 1.0 - np.sum((total_counts / n) ** 2)
    else:
        y_float = y.astype(np.float64)
        s1_total = float(np.sum(y_float))
        s2_total = float(np.sum(y_float * y_float))
        mean = s1_total / n
        parent = s2_total / n - mean * mean

    best: tuple[float, int, float, int] | None = None  # gain, feature, tau, cut pos
    best_payload: tuple | None = None

    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        if f in binary:
            n_left = int(np.searchsorted(sv, BINARY_THRESHOLD, side="right"))
            if n_left == 0 or n_left == n:
                continue
            cuts = np.asarray([n_left - 1])
        else:
            cuts = np.flatnonzero(sv[:-1] != sv[1:])
            if cuts.size == 0:
                continue
        n_l = (cuts + 1).astype(np.float64)
        n_r = n - n_l

        if task == "classification":
            sy = y_idx[order]
            onehot = np.zeros((n, m), dtype=np.float64)
            onehot[np.arange(n), sy] = 1.0
            cum = np.cumsum(onehot, axis=0)
            left_counts = cum[cuts]
            right_counts = total_counts - left_counts
            g_l = 1.0 - np.sum((left_counts / n_l[:, None]) ** 2, axis=1)
            g_r = 1.0 - np.sum((right_counts / n_r[:, None]) ** 2, axis=1)
        else:
            sy = y.astype(np.float64)[order]
            c1 = np.cumsum(sy)
            c2 = np.cumsum(sy * sy)
            ml = c1[cuts] / n_l
            mr = (s1_total - c1[cuts]) / n_r
            g_l = c2[cuts] / n_l - ml * ml
            g_r = (s2_total - c2[cuts]) / n_r - mr * mr

        gains = parent - ((n_l / n) * g_l + (n_r / n) * g_r)
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if best is None or gain > best[0]:
            cut = int(cuts[pos])
            if f in binary:
                tau = BINARY_THRESHOLD
            else:
                tau = (sv[cut] + sv[cut + 1]) / 2.0
                if not tau < sv[cut + 1]:
                    tau = float(sv[cut])
            best = (gain, f, float(tau), cut)
            if task == "classification":
                best_payload = (classes, left_counts[pos], right_counts[pos])
            else:
                best_payload = (
                    float(ml[pos]),
                    int(n_l[pos]),
                    float(mr[pos]),
                    int(n_r[pos]),
                )

    if best is None or best[0] <= min_gain:
        return None
    gain, f, tau, _ = best
    if task == "classification":
        classes, lc, rc = best_payload  # type: ignore[misc]
        left = _summary_from_counts(classes, lc)
        right = _summary_from_counts(classes, rc)
    else:
        ml, nl, mr, nr = best_payload  # type: ignore[misc]
        left = LabelSummary(label=ml, count=nl)
        right = LabelSummary(label=mr, count=nr)
    return SplitCandidate(feature=f, threshold=tau, gain=gain, left=left, right=right)


# ---------------------------------------------------------------------------
# node sampling
# ---------------------------------------------------------------------------


def node_sample(oracle, g: DiagonalGMM, box: BoxConstraint, n: int, seed: SeedLike) -> LabeledSample:
    """Draw n conditioned points and label them with one batched oracle call."""
    if n < 1:
        raise DomainError("node sample size must be positive")
    X = sample_conditional(g, box, n, seed)
    y = np.asarray(oracle.predict(X))
    if y.shape != (n,):
        raise OracleSessionError(
            f"oracle returned {y.shape} labels for a batch of {n} points"
        )
    return LabeledSample(X=X, y=y)


# ---------------------------------------------------------------------------
# best-first growth engine
# ---------------------------------------------------------------------------


@dataclass
class _LeafEval:
    label: LabelValue
    candidate: SplitCandidate | None


@dataclass
class _PendingLeaf:
    context: object
    evaluation: _LeafEval
    position: int  # index in the scratch node list
    depth: int


def _grow_best_first(
    task: str,
    feature_names: Sequence[str],
    budget: float,
    root_context: object,
    evaluate: Callable[[object, int, int, LabelSummary | None], _LeafEval],
    child_contexts: Callable[[object, SplitCandidate], tuple[object, object]],
) -> DecisionTree:
    """Shared engine: expand the highest-gain frontier leaf until done.

    ``evaluate(context, creation_index, depth, fallback)`` labels a leaf and
    proposes its best split; ``child_contexts`` materializes the two child
    contexts of an accepted split.
    """
    scratch: list[tuple] = []
    heap: list[tuple[float, int]] = []
    pending: dict[int, _PendingLeaf] = {}
    creation = 0

    root_eval = evaluate(root_context, 0, 0, None)
    scratch.append(("leaf", root_eval.label))
    if root_eval.candidate is not None:
        heapq.heappush(heap, (-root_eval.candidate.gain, 0))
        pending[0] = _PendingLeaf(root_context, root_eval, 0, 0)
    creation = 1
    used = 1

    while used + 2 <= budget and heap:
        _, idx = heapq.heappop(heap)
        leaf = pending.pop(idx)
        cand = leaf.evaluation.candidate
        assert cand is not None
        left_ctx, right_ctx = child_contexts(leaf.context, cand)
        child_depth = leaf.depth + 1
        children = []
        for ctx, side in ((left_ctx, cand.left), (right_ctx, cand.right)):
            ev = evaluate(ctx, creation, child_depth, side)
            children.append((ctx, ev))
            creation += 1
        left_pos = len(scratch)
        right_pos = left_pos + 1
        scratch[leaf.position] = (
            "split",
            cand.feature,
            cand.threshold,
            left_pos,
            right_pos,
        )
        for offset, (ctx, ev) in enumerate(children):
            scratch.append(("leaf", ev.label))
            if ev.candidate is not None:
                cidx = creation - 2 + offset
                heapq.heappush(heap, (-ev.candidate.gain, cidx))
                pending[cidx] = _PendingLeaf(ctx, ev, left_pos + offset, child_depth)
        used += 2

    return _scratch_to_tree(task, feature_names, scratch)


def _scratch_to_tree(
    task: str, feature_names: Sequence[str], scratch: list[tuple]
) -> DecisionTree:
    # renumber into pre-order so serialized trees are canonical
    order: list[int] = []
    mapping: dict[int, int] = {}

    def visit(i: int) -> None:
        mapping[i] = len(order)
        order.append(i)
        node = scratch[i]
        if node[0] == "split":
            visit(node[3])
            visit(node[4])

    visit(0)
    nodes: list[Node] = []
    for i in order:
        node = scratch[i]
        if node[0] == "split":
            nodes.append(
                Split(
                    feature=node[1],
                    threshold=float(node[2]),
                    left=mapping[node[3]],
                    right=mapping[node[4]],
                )
            )
        else:
            nodes.append(Leaf(label=node[1]))
    return DecisionTree(task=task, feature_names=tuple(feature_names), nodes=tuple(nodes))


# ---------------------------------------------------------------------------
# the extractor
# ---------------------------------------------------------------------------


def _node_seed(seed: int, creation_index: int) -> np.random.SeedSequence:
    # one stream per node so evaluation order cannot change results
    return np.random.SeedSequence(entropy=seed, spawn_key=(creation_index,))


def extract_tree(oracle, g: DiagonalGMM, cfg: ExtractionConfig) -> DecisionTree:
    """Distill the oracle into a small tree by conditioned active sampling."""
    if oracle.dimension != g.dimension:
        raise DomainError(
            f"oracle dimension {oracle.dimension} != mixture dimension {g.dimension}"
        )
    names = (
        tuple(g.feature_names)
        if g.feature_names
        else tuple(f"x{i}" for i in range(g.dimension))
    )

    def evaluate(ctx, creation_index, depth, fallback):
        box: BoxConstraint = ctx
        try:
            sample = node_sample(
                oracle, g, box, cfg.samples_per_node, _node_seed(cfg.seed, creation_index)
            )
        except ZeroMassRegion:
            if fallback is None:
                raise DomainError("the root region carries no probability mass")
            return _LeafEval(label=fallback.label, candidate=None)
        except OracleError as exc:
            raise OracleSessionError(
                f"oracle failed while labelling node {creation_index}: {exc}"
            ) from exc
        summary = _summarize(sample.y, cfg.task)
        candidate = None
        if depth < cfg.max_depth:
            candidate = best_split(
                sample, cfg.task, min_gain=cfg.min_gain, binary_features=cfg.binary_features
            )
        return _LeafEval(label=summary.label, candidate=candidate)

    def child_contexts(ctx, cand):
        box: BoxConstraint = ctx
        return (
            box.refined(cand.feature, LEQ, cand.threshold),
            box.refined(cand.feature, GT, cand.threshold),
        )

    return _grow_best_first(
        cfg.task,
        names,
        cfg.effective_budget,
        BoxConstraint.full(g.dimension),
        evaluate,
        child_contexts,
    )


# ---------------------------------------------------------------------------
# CART on a fixed labelled set
# ---------------------------------------------------------------------------


def fit_cart(
    X: np.ndarray,
    y: np.ndarray,
    node_budget: int | None = 31,
    task: str = "classification",
    min_gain: float = 1e-7,
    max_depth: int = 64,
    binary_features: Sequence[int] = (),
    feature_names: Sequence[str] | None = None,
) -> DecisionTree:
    """Best-first CART with the same split scan, on fixed data (no resampling).

    ``node_budget=None`` grows until no split clears ``min_gain``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("training data must be a non-empty 2-D matrix")
    if y.shape != (X.shape[0],):
        raise DomainError("one label per row required")
    names = (
        tuple(feature_names)
        if feature_names
        else tuple(f"x{i}" for i in range(X.shape[1]))
    )
    budget: float = math.inf if node_budget is None else float(
        node_budget if node_budget % 2 == 1 else node_budget - 1
    )

    def evaluate(ctx, creation_index, depth, fallback):
        rows: np.ndarray = ctx
        y_sub = y[rows]
        summary = _summarize(y_sub, task)
        candidate = None
        if depth < max_depth and rows.size >= 2:
            candidate = best_split(
                LabeledSample(X=X[rows], y=y_sub),
                task,
                min_gain=min_gain,
                binary_features=binary_features,
            )
        return _LeafEval(label=summary.label, candidate=candidate)

    def child_contexts(ctx, cand):
        rows: np.ndarray = ctx
        goes_left = X[rows, cand.feature] <= cand.threshold
        return rows[goes_left], rows[~goes_left]

    return _grow_best_first(
        task,
        names,
        budget,
        np.arange(X.shape[0]),
        evaluate,
        child_contexts,
    )


# ---------------------------------------------------------------------------
# bagged forest (self-contained target model)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Forest:
    """Bootstrap ensemble of unlimited-budget CART trees; usable as an oracle."""

    task: str
    feature_names: tuple[str, ...]
    trees: tuple[DecisionTree, ...]
    labels: tuple[int, ...] | None = None
    concurrent: bool = True

    @property
    def dimension(self) -> int:
        return len(self.feature_names)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.stack([t.predict(X) for t in self.trees])
        if self.task == "regression":
            return votes.mean(axis=0)
        classes = np.asarray(
            self.labels if self.labels else np.unique(votes), dtype=np.int64
        )
        idx = np.searchsorted(classes, votes)
        counts = np.zeros((X.shape[0], classes.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for t in range(votes.shape[0]):
            counts[rows, idx[t]] += 1
        return classes[np.argmax(counts, axis=1)]

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "feature_names": list(self.feature_names),
            "labels": list(self.labels) if self.labels else None,
            "trees": [t.to_json_dict()["nodes"] for t in self.trees],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Forest":
        names = tuple(doc["feature_names"])
        trees = tuple(
            DecisionTree.from_json_dict(
                {"task": doc["task"], "feature_names": names, "nodes": nodes}
            )
            for nodes in doc["trees"]
        )
        labels = doc.get("labels")
        return cls(
            task=doc["task"],
            feature_names=names,
            trees=trees,
            labels=tuple(labels) if labels else None,
        )


def _remap_features(tree: DecisionTree, subset: np.ndarray, names: Sequence[str]) -> DecisionTree:
    nodes: list[Node] = []
    for node in tree.nodes:
        if isinstance(node, Split):
            nodes.append(replace(node, feature=int(subset[node.feature])))
        else:
            nodes.append(node)
    return DecisionTree(task=tree.task, feature_names=tuple(names), nodes=tuple(nodes))


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 25,
    seed: int = 0,
    task: str = "classification",
    bootstrap: bool = True,
    feature_fraction: str | None = "sqrt",
    binary_features: Sequence[int] = (),
    feature_names: Sequence[str] | None = None,
    max_depth: int = 64,
) -> Forest:
    """Bagging over bootstrap resamples with per-tree feature subsampling."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, d = X.shape
    if n < 2:
        raise DomainError("need at least two rows to fit a forest")
    names = (
        tuple(feature_names) if feature_names else tuple(f"x{i}" for i in range(d))
    )
    binary = frozenset(binary_features)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(t,)))
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        if feature_fraction == "sqrt" and d > 1:
            m_sub = max(1, round(math.sqrt(d)))
            subset = np.sort(rng.choice(d, size=m_sub, replace=False))
        else:
            subset = np.arange(d)
        sub_binary = [int(np.searchsorted(subset, b)) for b in binary if b in subset]
        tree = fit_cart(
            X[rows][:, subset],
            y[rows],
            node_budget=None,
            task=task,
            binary_features=sub_binary,
            max_depth=max_depth,
        )
        trees.append(_remap_features(tree, subset, names))
    labels = None
    if task == "classification":
        labels = tuple(int(v) for v in np.unique(y))
    return Forest(task=task, feature_names=names, trees=tuple(trees), labels=labels)
