import math

import numpy as np
import pytest

from treemirror.core import BoxConstraint, simplify_constraint
from treemirror.errors import DomainError, ZeroMassRegion
from treemirror.gmm import DiagonalGMM, conditional_weights, sample_conditional

from .conftest import boxed_masses_quad


def two_component_line() -> DiagonalGMM:
    return DiagonalGMM(
        weights=np.asarray([0.5, 0.5]),
        means=np.asarray([[-2.0], [2.0]]),
        stds=np.asarray([[1.0], [1.0]]),
    )


def test_full_box_moments():
    g = DiagonalGMM(
        weights=np.asarray([1.0]),
        means=np.asarray([[1.0, -2.0]]),
        stds=np.asarray([[0.5, 2.0]]),
    )
    X = sample_conditional(g, BoxConstraint.full(2), 100_000, seed=0)
    assert np.allclose(X.mean(axis=0), [1.0, -2.0], atol=0.02)
    assert np.allclose(X.std(axis=0), [0.5, 2.0], atol=0.02)


def test_restricted_dimension_is_hard_bounded():
    g = DiagonalGMM(
        weights=np.asarray([1.0]), means=np.zeros((1, 2)), stds=np.ones((1, 2))
    )
    box = BoxConstraint.from_intervals([(0.0, 1.0), (-math.inf, math.inf)])
    X = sample_conditional(g, box, 20_000, seed=1)
    assert X[:, 0].min() >= 0.0 and X[:, 0].max() <= 1.0
    assert box.contains_batch(X).all()


def test_component_mix_follows_conditional_weights():
    # mixture on a half line: about 97.7% of draws come from the +2 component;
    # the categorical draw is the first rng consumption, so it can be replayed
    g = two_component_line()
    box = simplify_constraint([(0, ">", 0.0)], 1)
    w = conditional_weights(g, box)
    n = 100_000
    replay = np.random.default_rng(7)
    cumulative = np.cumsum(w.phi)
    cumulative[-1] = 1.0
    comp = np.searchsorted(cumulative, replay.random(n), side="right")
    frac = np.mean(comp == 1)
    assert abs(frac - w.phi[1]) < 0.01
    assert w.phi[1] == pytest.approx(0.9772498680518208, rel=1e-12)
    # and the realized draws carry the right mass beyond a probe threshold
    X = sample_conditional(g, box, n, seed=7)
    above = simplify_constraint([(0, ">", 1.0)], 1)
    expected = boxed_masses_quad(g, above).sum() / boxed_masses_quad(g, box).sum()
    assert abs(np.mean(X[:, 0] > 1.0) - expected) < 3.0 / math.sqrt(n)


def test_strict_lower_boundary_is_respected():
    g = DiagonalGMM(
        weights=np.asarray([1.0]), means=np.zeros((1, 1)), stds=np.ones((1, 1))
    )
    box = simplify_constraint([(0, ">", 0.0)], 1)
    X = sample_conditional(g, box, 50_000, seed=3)
    assert box.contains_batch(X).all()


def test_sub_box_mass_ratio(rng):
    # empirical probability of a sub-box matches the mass ratio within 3/sqrt(n)
    g = DiagonalGMM(
        weights=np.asarray([0.4, 0.6]),
        means=np.asarray([[0.0, 1.0], [2.0, -1.0]]),
        stds=np.asarray([[1.0, 0.8], [0.7, 1.5]]),
    )
    box = BoxConstraint.from_intervals([(-1.0, 3.0), (-math.inf, 2.0)])
    sub = BoxConstraint.from_intervals([(-1.0, 1.0), (-1.0, 2.0)])
    n = 100_000
    X = sample_conditional(g, box, n, seed=11)
    empirical = float(np.mean(sub.contains_batch(X)))
    z_box = conditional_weights(g, box).total_mass
    z_sub = conditional_weights(g, sub).total_mass
    assert abs(empirical - z_sub / z_box) < 3.0 / math.sqrt(n)


def test_bit_identical_given_seed():
    g = two_component_line()
    box = simplify_constraint([(0, ">", -1.0)], 1)
    a = sample_conditional(g, box, 5_000, seed=42)
    b = sample_conditional(g, box, 5_000, seed=42)
    assert np.array_equal(a, b)


def test_zero_mass_propagates():
    g = DiagonalGMM(
        weights=np.asarray([1.0]), means=np.zeros((1, 1)), stds=np.ones((1, 1))
    )
    with pytest.raises(ZeroMassRegion):
        sample_conditional(g, BoxConstraint.from_intervals([(60.0, 61.0)]), 10, seed=0)


def test_sample_count_precondition():
    g = two_component_line()
    with pytest.raises(DomainError):
        sample_conditional(g, BoxConstraint.full(1), 0, seed=0)
