import numpy as np
import pytest

from treemirror.errors import DomainError
from treemirror.extraction import Forest, fit_cart, fit_forest
from treemirror.synthetic import wine_like


def xor_data(counts=(25, 25, 25, 25)):
    corners = np.asarray([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    X = np.repeat(corners, counts, axis=0)
    y = np.where(X[:, 0] != X[:, 1], 2, 1)
    return X, y


def test_pure_labels_fit_to_single_leaf():
    X = np.random.default_rng(0).normal(size=(20, 3))
    tree = fit_cart(X, np.full(20, 4), node_budget=31)
    assert tree.node_count == 1
    assert tree.predict_one(X[0]) == 4


def test_xor_with_mild_imbalance_is_solved_at_k7():
    # one heavier corner gives the first cut a positive gain; two levels finish
    X, y = xor_data(counts=(27, 25, 25, 25))
    tree = fit_cart(X, y, node_budget=7)
    assert np.mean(tree.predict(X) == y) == 1.0
    assert tree.node_count == 7


def test_balanced_xor_is_capped_by_single_split():
    X, y = xor_data()
    tree = fit_cart(X, y, node_budget=3)
    assert np.mean(tree.predict(X) == y) <= 0.75


def test_cart_regression_reduces_variance():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(200, 2))
    y = np.where(X[:, 0] > 0.2, 5.0, -5.0) + rng.normal(scale=0.1, size=200)
    tree = fit_cart(X, y, node_budget=3, task="regression")
    pred = tree.predict(X)
    assert np.mean((pred - y) ** 2) < 1.0


def test_cart_empty_data_rejected():
    with pytest.raises(DomainError):
        fit_cart(np.zeros((0, 2)), np.zeros(0))


def test_degenerate_forest_equals_unlimited_cart():
    data = wine_like(rows=90, seed=1)
    forest = fit_forest(
        data.X, data.y, n_trees=1, seed=0, bootstrap=False, feature_fraction=None
    )
    cart = fit_cart(data.X, data.y, node_budget=None)
    probe = wine_like(rows=60, seed=2).X
    assert np.array_equal(forest.predict(probe), cart.predict(probe))


def test_forest_is_deterministic():
    data = wine_like(rows=80, seed=3)
    a = fit_forest(data.X, data.y, n_trees=5, seed=9)
    b = fit_forest(data.X, data.y, n_trees=5, seed=9)
    probe = wine_like(rows=40, seed=4).X
    assert np.array_equal(a.predict(probe), b.predict(probe))


def test_forest_beats_single_cart_on_most_splits():
    data = wine_like(rows=178, seed=0)
    n = data.X.shape[0]
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        half = n // 2
        tr, te = perm[:half], perm[half:]
        forest = fit_forest(data.X[tr], data.y[tr], n_trees=25, seed=seed)
        cart = fit_cart(data.X[tr], data.y[tr], node_budget=31)
        acc_forest = np.mean(forest.predict(data.X[te]) == data.y[te])
        acc_cart = np.mean(cart.predict(data.X[te]) == data.y[te])
        wins += acc_forest > acc_cart
    assert wins >= 6


def test_forest_regression_mean_vote():
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, size=(120, 3))
    y = 2.0 * X[:, 0] + rng.normal(scale=0.1, size=120)
    forest = fit_forest(X, y, n_trees=10, seed=1, task="regression")
    pred = forest.predict(X)
    assert pred.dtype == np.float64
    assert np.mean((pred - y) ** 2) < 0.5


def test_forest_json_round_trip():
    data = wine_like(rows=60, seed=6)
    forest = fit_forest(data.X, data.y, n_trees=3, seed=2)
    doc = forest.to_json_dict()
    again = Forest.from_json_dict(doc)
    probe = data.X[:20]
    assert np.array_equal(again.predict(probe), forest.predict(probe))
    assert again.to_json_dict() == doc
