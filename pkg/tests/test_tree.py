import json

import numpy as np
import pytest

from treemirror.core import DecisionTree, Leaf, Split, simplify_constraint, single_leaf_tree
from treemirror.errors import DimensionMismatch, DomainError

from .conftest import random_tree


def cartpole_showcase_tree() -> DecisionTree:
    # move right exactly when pole velocity > -0.286 and pole angle > -0.071
    return DecisionTree(
        task="classification",
        feature_names=("pole_velocity", "pole_angle"),
        nodes=(
            Split(feature=0, threshold=-0.286, left=1, right=2),
            Leaf(label=0),
            Split(feature=1, threshold=-0.071, left=3, right=4),
            Leaf(label=0),
            Leaf(label=1),
        ),
    )


def test_single_leaf_tree_predicts_its_label():
    tree = single_leaf_tree("classification", ("a", "b"), 1)
    assert tree.predict_one([5.0, -3.0]) == 1
    assert tree.node_count == 1


def test_cartpole_tree_branches():
    tree = cartpole_showcase_tree()
    assert tree.predict_one([0.0, 0.0]) == 1  # balanced state: push right
    assert tree.predict_one([-1.0, 0.0]) == 0  # pole swinging left fast: push left
    assert tree.predict_one([0.0, -0.5]) == 0


def test_predict_dimension_mismatch():
    tree = cartpole_showcase_tree()
    with pytest.raises(DimensionMismatch):
        tree.predict_one([0.0])
    with pytest.raises(DimensionMismatch):
        tree.predict(np.zeros((4, 3)))


def test_path_constraint_root_and_child():
    tree = DecisionTree(
        task="classification",
        feature_names=("a", "b", "c"),
        nodes=(Split(feature=2, threshold=0.5, left=1, right=2), Leaf(1), Leaf(2)),
    )
    root_box = tree.path_constraint(0)
    assert not root_box.empty and root_box.upper[2] == np.inf
    left_box = tree.path_constraint(1)
    assert left_box.upper[2] == 0.5


def test_path_constraint_merges_repeated_feature():
    # two splits on the same feature along one path collapse to one interval
    tree = DecisionTree(
        task="classification",
        feature_names=("a",),
        nodes=(
            Split(feature=0, threshold=3.0, left=1, right=4),
            Split(feature=0, threshold=1.0, left=2, right=3),
            Leaf(1),
            Leaf(2),
            Leaf(3),
        ),
    )
    box = tree.path_constraint(3)  # a <= 3 then a > 1
    assert box == simplify_constraint([(0, "<=", 3.0), (0, ">", 1.0)], 1)


def test_foreign_node_handle_rejected():
    tree = cartpole_showcase_tree()
    with pytest.raises(DomainError):
        tree.path_constraint(99)
    with pytest.raises(DomainError):
        tree.depth_of(-1)


def test_partition_property(rng):
    # every point lands in exactly one leaf's path constraint
    for _ in range(10):
        tree = random_tree(rng, dimension=3, n_splits=5)
        X = rng.normal(size=(200, 3))
        membership = np.stack(
            [tree.path_constraint(leaf).contains_batch(X) for leaf in tree.leaf_ids()]
        )
        assert (membership.sum(axis=0) == 1).all()


def test_predict_matches_membership_scan(rng):
    for _ in range(10):
        tree = random_tree(rng, dimension=3, n_splits=5)
        X = rng.normal(size=(50, 3))
        preds = tree.predict(X)
        for row, pred in zip(X, preds):
            labels = [
                tree.nodes[leaf].label
                for leaf in tree.leaf_ids()
                if tree.path_constraint(leaf).contains(row)
            ]
            assert labels == [pred]


def test_batch_predict_matches_predict_one(rng):
    tree = random_tree(rng, dimension=4, n_splits=6)
    X = rng.normal(size=(100, 4))
    assert tree.predict(X).tolist() == [tree.predict_one(row) for row in X]


def test_json_round_trip_and_stability():
    tree = cartpole_showcase_tree()
    text = tree.to_json()
    again = DecisionTree.from_json(text)
    assert again == tree
    assert again.to_json() == text
    doc = json.loads(text)
    assert doc["nodes"][0] == {
        "kind": "split",
        "feature": 0,
        "threshold": -0.286,
        "left": 1,
        "right": 2,
    }


def test_malformed_tree_documents_rejected():
    with pytest.raises(DomainError):
        DecisionTree.from_json("{}")
    with pytest.raises(DomainError):
        DecisionTree.from_json_dict(
            {"task": "classification", "feature_names": ["a"], "nodes": [{"kind": "what"}]}
        )


def test_structural_validation():
    with pytest.raises(DomainError):
        DecisionTree(
            task="classification",
            feature_names=("a",),
            nodes=(Split(feature=0, threshold=0.0, left=0, right=1), Leaf(1)),
        )
    with pytest.raises(DomainError):
        DecisionTree(
            task="classification",
            feature_names=("a",),
            nodes=(Split(feature=5, threshold=0.0, left=1, right=2), Leaf(1), Leaf(2)),
        )


def test_dot_and_rules_render():
    tree = cartpole_showcase_tree()
    dot = tree.to_dot()
    assert dot.startswith("digraph") and "pole_velocity" in dot
    rules = tree.rules()
    assert len(rules) == len(tree.leaf_ids())
    assert all(rule.startswith("IF ") for rule in rules)
