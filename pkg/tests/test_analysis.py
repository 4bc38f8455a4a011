
import numpy as np
import pytest

from treemirror.analysis import (
    FidelityReport,
    compare_models,
    dependence_report,
    feature_effect,
    fidelity,
    macro_f1,
    occurrence_report,
    subgroup_effect,
)
from treemirror.core import DecisionTree, Leaf, Split
from treemirror.errors import DegenerateConditioning, DomainError
from treemirror.gmm import DiagonalGMM
from treemirror.oracles import FunctionOracle

from .conftest import random_tree


def gender_mixture(d: int = 3, gender: int = 2) -> DiagonalGMM:
    means = np.zeros((2, d))
    means[1, gender] = 1.0
    stds = np.full((2, d), 1.0)
    stds[:, gender] = 0.05
    return DiagonalGMM(weights=np.asarray([0.5, 0.5]), means=means, stds=stds)


def linear_oracle(delta: float = 0.7) -> FunctionOracle:
    return FunctionOracle(
        fn=lambda X: 0.8 * X[:, 0] - 0.5 * X[:, 1] + delta * (X[:, 2] > 0.5) + 3.0,
        dimension=3,
        task="regression",
    )


# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------


def test_tree_against_itself_is_perfect(rng):
    tree = random_tree(rng, dimension=3, n_splits=4)
    X = rng.normal(size=(200, 3))
    report = fidelity(tree, tree, X)
    assert report.relative == 1.0


def test_complement_scores_zero():
    tree = DecisionTree(
        task="classification",
        feature_names=("a",),
        nodes=(Split(0, 0.0, 1, 2), Leaf(0), Leaf(1)),
    )
    flipped = FunctionOracle(
        fn=lambda X: 1 - tree.predict(X), dimension=1, task="classification"
    )
    X = np.linspace(-2, 2, 50)[:, None]
    assert fidelity(tree, flipped, X).relative == 0.0


def test_regression_fidelity_is_mse():
    tree = DecisionTree(
        task="regression",
        feature_names=("a",),
        nodes=(Leaf(1.0),),
    )
    oracle = FunctionOracle(fn=lambda X: np.full(len(X), 3.0), dimension=1, task="regression")
    report = fidelity(tree, oracle, np.zeros((10, 1)), y_true=np.full(10, 2.0))
    assert report.relative == pytest.approx(4.0)
    assert report.absolute == pytest.approx(1.0)
    assert report.relative_metric == "mse"


def test_fidelity_includes_macro_f1():
    pred = np.asarray([1, 1, 2, 2])
    truth = np.asarray([1, 2, 2, 2])
    # class 1: p=0.5 r=1 f1=2/3; class 2: p=1 r=2/3 f1=0.8
    assert macro_f1(pred, truth) == pytest.approx((2 / 3 + 0.8) / 2)


def test_fidelity_rejects_empty_test_set():
    tree = DecisionTree(task="classification", feature_names=("a",), nodes=(Leaf(1),))
    with pytest.raises(DomainError):
        fidelity(tree, tree, np.zeros((0, 1)))


# ---------------------------------------------------------------------------
# feature effect
# ---------------------------------------------------------------------------


def test_effect_of_ignored_feature_is_zero():
    g = gender_mixture()
    oracle = FunctionOracle(
        fn=lambda X: 2.0 * X[:, 0] + X[:, 1], dimension=3, task="regression"
    )
    est = feature_effect(oracle, g, feature=2, n=20_000, seed=0)
    assert abs(est.delta) < 3 * est.se + 1e-9


def test_identity_indicator_effect_is_one():
    g = gender_mixture()
    oracle = FunctionOracle(
        fn=lambda X: (X[:, 2] > 0.5).astype(float), dimension=3, task="regression"
    )
    est = feature_effect(oracle, g, feature=2, n=20_000, seed=1)
    assert est.delta == pytest.approx(1.0, abs=1e-6)


def test_effect_recovers_known_shift():
    est = feature_effect(linear_oracle(0.7), gender_mixture(), feature=2, n=100_000, seed=2)
    assert est.delta == pytest.approx(0.7, rel=0.05)


def test_effect_is_exactly_antisymmetric():
    g = gender_mixture()
    oracle = linear_oracle()
    fwd = feature_effect(oracle, g, feature=2, v_low=0, v_high=1, n=5_000, seed=3)
    rev = feature_effect(oracle, g, feature=2, v_low=1, v_high=0, n=5_000, seed=3)
    assert rev.delta == -fwd.delta


def test_effect_interval_pairs_for_numeric_features():
    g = gender_mixture()
    oracle = FunctionOracle(fn=lambda X: X[:, 0], dimension=3, task="regression")
    est = feature_effect(
        oracle, g, feature=0, v_low=(-2.0, 0.0), v_high=(0.0, 2.0), n=20_000, seed=4
    )
    assert est.delta > 0.5


def test_effect_classification_uses_class_indicator():
    g = gender_mixture()
    oracle = FunctionOracle(
        fn=lambda X: np.where(X[:, 2] > 0.5, 2, 1).astype(np.int64),
        dimension=3,
        task="classification",
    )
    est = feature_effect(oracle, g, feature=2, n=20_000, seed=5, effect_class=2)
    assert est.delta == pytest.approx(1.0, abs=1e-6)


def test_degenerate_conditioning_raises():
    g = gender_mixture()
    oracle = linear_oracle()
    with pytest.raises(DegenerateConditioning):
        feature_effect(
            oracle, g, feature=0, v_low=(90.0, 91.0), v_high=(0.0, 1.0), n=100, seed=0
        )


def test_repeated_estimates_have_honest_standard_errors():
    g = gender_mixture()
    oracle = linear_oracle()
    runs = [
        feature_effect(oracle, g, feature=2, n=4_000, seed=seed) for seed in range(40)
    ]
    deltas = np.asarray([r.delta for r in runs])
    ses = np.asarray([r.se for r in runs])
    center = np.median(deltas)
    violations = np.sum(np.abs(deltas - center) > 4 * ses)
    assert violations <= 1


# ---------------------------------------------------------------------------
# subgroup effects
# ---------------------------------------------------------------------------


def audit_tree() -> DecisionTree:
    return DecisionTree(
        task="regression",
        feature_names=("g1", "g2", "gender"),
        nodes=(
            Split(feature=0, threshold=0.0, left=1, right=2),
            Leaf(1.0),
            Split(feature=2, threshold=0.5, left=3, right=4),
            Leaf(2.0),
            Leaf(3.0),
        ),
    )


def test_constant_oracle_has_zero_subgroup_effect(rng):
    g = gender_mixture()
    oracle = FunctionOracle(fn=lambda X: np.full(len(X), 5.0), dimension=3, task="regression")
    X_test = rng.normal(size=(50, 3))
    sub = subgroup_effect(oracle, g, audit_tree(), node=0, X_test=X_test, n=4_000, seed=0)
    assert sub.delta_n == pytest.approx(0.0, abs=1e-9)


def test_root_prevalence_is_exactly_one(rng):
    g = gender_mixture()
    X_test = rng.normal(size=(37, 3))
    sub = subgroup_effect(linear_oracle(), g, audit_tree(), node=0, X_test=X_test, n=2_000, seed=1)
    assert sub.prevalence == 1.0
    assert sub.test_count == 37


def test_child_prevalence_adds_up_exactly(rng):
    g = gender_mixture()
    tree = audit_tree()
    X_test = rng.normal(size=(101, 3))
    oracle = linear_oracle()
    for node in tree.internal_ids():
        split = tree.nodes[node]
        parent = subgroup_effect(oracle, g, tree, node, X_test, n=500, seed=2)
        counts = []
        for child in (split.left, split.right):
            counts.append(int(tree.path_constraint(child).contains_batch(X_test).sum()))
        assert parent.test_count == counts[0] + counts[1]
        assert parent.prevalence == (counts[0] + counts[1]) / X_test.shape[0]


def test_subgroup_requires_internal_node(rng):
    g = gender_mixture()
    with pytest.raises(DomainError):
        subgroup_effect(
            linear_oracle(), g, audit_tree(), node=1, X_test=rng.normal(size=(5, 3)), n=100, seed=0
        )


def test_dependence_report_shares(rng):
    g = gender_mixture()
    oracle = linear_oracle(0.7)
    tree = audit_tree()
    X_test = rng.normal(size=(60, 3))
    report = dependence_report(oracle, g, tree, feature=2, X_test=X_test, n=20_000, seed=3)
    assert len(report.entries) == 1
    entry = report.entries[0]
    assert entry["node"] == 2
    assert entry["share"] == pytest.approx(
        entry["prevalence"] * entry["delta_n"] / report.overall.delta
    )


# ---------------------------------------------------------------------------
# occurrence and comparison
# ---------------------------------------------------------------------------


def test_occurrence_counts(rng):
    trees = [random_tree(rng, dimension=2, n_splits=2) for _ in range(5)]
    report = occurrence_report(trees, feature=0)
    assert report.n_trees == 5
    assert 0 <= report.n_at_root <= report.n_occurring <= 5
    absent = occurrence_report(trees, feature=99)
    assert absent.n_occurring == 0


def test_occurrence_feature_at_every_root():
    tree = DecisionTree(
        task="classification",
        feature_names=("a", "b"),
        nodes=(Split(0, 0.0, 1, 2), Leaf(1), Leaf(2)),
    )
    report = occurrence_report([tree, tree, tree], feature=0)
    assert report.n_occurring == 3 and report.n_at_root == 3
    assert all(e["min_depth"] == 0 for e in report.per_tree)


def _fidelity_stub(rel: float, absolute: float | None = None) -> FidelityReport:
    return FidelityReport(
        task="classification",
        n_test=10,
        relative=rel,
        relative_metric="agreement",
        absolute=absolute,
        absolute_metric="f1_macro" if absolute is not None else None,
    )


def test_identical_trees_have_no_distinct_features():
    tree = DecisionTree(
        task="classification",
        feature_names=("a", "b"),
        nodes=(Split(0, 0.5, 1, 2), Leaf(1), Leaf(2)),
    )
    cmp = compare_models([("m1", tree, _fidelity_stub(0.9)), ("m2", tree, _fidelity_stub(0.8))])
    assert all(not feats for feats in cmp.distinct_features.values())
    assert cmp.shared_features == ("a",)


def test_threshold_range_reported_for_shared_features():
    def tree_at(tau: float) -> DecisionTree:
        return DecisionTree(
            task="classification",
            feature_names=("a", "b"),
            nodes=(Split(0, tau, 1, 2), Leaf(1), Leaf(2)),
        )

    cmp = compare_models(
        [
            ("lo", tree_at(0.2), _fidelity_stub(0.9)),
            ("hi", tree_at(0.9), _fidelity_stub(0.85)),
        ]
    )
    assert cmp.threshold_ranges["a"] == (0.2, 0.9)


def test_weak_only_features_are_flagged():
    good = DecisionTree(
        task="classification",
        feature_names=("alcohol", "chlorides"),
        nodes=(Split(0, 0.5, 1, 2), Leaf(1), Leaf(2)),
    )
    bad = DecisionTree(
        task="classification",
        feature_names=("alcohol", "chlorides"),
        nodes=(
            Split(0, 0.4, 1, 2),
            Leaf(1),
            Split(1, 0.1, 3, 4),
            Leaf(1),
            Leaf(2),
        ),
    )
    cmp = compare_models(
        [
            ("good-1", good, _fidelity_stub(0.95, 0.96)),
            ("good-2", good, _fidelity_stub(0.94, 0.95)),
            ("bad-1", bad, _fidelity_stub(0.70, 0.71)),
            ("bad-2", bad, _fidelity_stub(0.72, 0.74)),
        ]
    )
    assert cmp.flagged_features == ("chlorides",)


def test_compare_needs_two_entries():
    tree = DecisionTree(task="classification", feature_names=("a",), nodes=(Leaf(1),))
    with pytest.raises(DomainError):
        compare_models([("solo", tree, _fidelity_stub(1.0))])
