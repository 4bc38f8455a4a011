"""Shared test helpers: independent oracles and random structure generators."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from treemirror.core import BoxConstraint, DecisionTree, Leaf, Split
from treemirror.gmm import DiagonalGMM

# ---------------------------------------------------------------------------
# quadrature oracles (independent of the erf-based implementation paths)
# ---------------------------------------------------------------------------


def normal_pdf(x: float, mu: float, sigma: float) -> float:
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def interval_mass_quad(mu: float, sigma: float, lo: float, hi: float) -> float:
    val, _ = quad(
        normal_pdf, lo, hi, args=(mu, sigma), epsabs=0.0, epsrel=1e-12, limit=400
    )
    return val


def boxed_masses_quad(g: DiagonalGMM, box: BoxConstraint) -> np.ndarray:
    """Unnormalized per-component box masses by 1-D numeric integration."""
    out = np.empty(g.n_components)
    for j in range(g.n_components):
        prod = 1.0
        for i in range(g.dimension):
            prod *= interval_mass_quad(
                g.means[j, i], g.stds[j, i], box.lower[i], box.upper[i]
            )
        out[j] = g.weights[j] * prod
    return out


def truncated_moments_quad(
    mu: float, sigma: float, lo: float, hi: float
) -> tuple[float, float, float]:
    """(mean, variance, 4th central moment) of N(mu, sigma) on [lo, hi]."""
    z = interval_mass_quad(mu, sigma, lo, hi)

    def moment(power: int, center: float) -> float:
        val, _ = quad(
            lambda x: (x - center) ** power * normal_pdf(x, mu, sigma),
            lo,
            hi,
            epsabs=0.0,
            epsrel=1e-11,
            limit=400,
        )
        return val / z

    m1 = moment(1, 0.0)
    var = moment(2, m1)
    m4 = moment(4, m1)
    return m1, var, m4


# ---------------------------------------------------------------------------
# brute-force split scan (independent enumeration over every candidate)
# ---------------------------------------------------------------------------


def brute_force_best_split(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    min_gain: float = 0.0,
    binary: frozenset[int] = frozenset(),
):
    """Naive rescan of every (feature, midpoint) pair; returns (f, tau, gain)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = y.size
    if n < 2:
        return None
    if task == "classification":
        classes, y_idx = np.unique(y, return_inverse=True)
        m = classes.size
        if m == 1:
            return None
        counts_total = np.bincount(y_idx, minlength=m).astype(np.float64)
        parent = 1.0 - np.sum((counts_total / n) ** 2)
    else:
        yf = y.astype(np.float64)
        s1_total = float(np.sum(yf))
        s2_total = float(np.sum(yf * yf))
        mean = s1_total / n
        parent = s2_total / n - mean * mean

    best = None
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        if f in binary:
            n_left = int(np.searchsorted(sv, 0.5, side="right"))
            positions = [n_left - 1] if 0 < n_left < n else []
        else:
            positions = [p for p in range(n - 1) if sv[p] != sv[p + 1]]
        if not positions:
            continue
        if task == "classification":
            sy = y_idx[order]
        else:
            sy = y.astype(np.float64)[order]
            prefix1, prefix2 = [], []
            run1 = run2 = 0.0
            for v in sy:
                run1 += v
                run2 += v * v
                prefix1.append(run1)
                prefix2.append(run2)
        for p in positions:
            n_l = np.float64(p + 1)
            n_r = np.float64(n) - n_l
            if task == "classification":
                lc = np.bincount(sy[: p + 1], minlength=m).astype(np.float64)
                rc = counts_total - lc
                g_l = 1.0 - np.sum((lc / n_l) ** 2)
                g_r = 1.0 - np.sum((rc / n_r) ** 2)
            else:
                ml = prefix1[p] / n_l
                mr = (s1_total - prefix1[p]) / n_r
                g_l = prefix2[p] / n_l - ml * ml
                g_r = (s2_total - prefix2[p]) / n_r - mr * mr
            gain = parent - ((n_l / n) * g_l + (n_r / n) * g_r)
            if f in binary:
                tau = 0.5
            else:
                tau = (sv[p] + sv[p + 1]) / 2.0
                if not tau < sv[p + 1]:
                    tau = float(sv[p])
            if best is None or gain > best[2]:
                best = (f, float(tau), float(gain))
    if best is None or best[2] <= min_gain:
        return None
    return best


# ---------------------------------------------------------------------------
# random structures
# ---------------------------------------------------------------------------


def random_tree(
    rng: np.random.Generator,
    dimension: int = 3,
    n_splits: int = 4,
    task: str = "classification",
) -> DecisionTree:
    """Grow a random valid tree by splitting random leaves inside their boxes."""
    names = tuple(f"x{i}" for i in range(dimension))
    nodes: list = [("leaf", int(rng.integers(1, 4)))]
    boxes = {0: BoxConstraint.full(dimension)}
    leaves = [0]
    for _ in range(n_splits):
        rng.shuffle(leaves)
        chosen = None
        for leaf_idx in leaves:
            box = boxes[leaf_idx]
            feats = [
                i
                for i in range(dimension)
                if max(box.lower[i], -3.0) < min(box.upper[i], 3.0)
            ]
            if feats:
                chosen = (leaf_idx, feats)
                break
        if chosen is None:
            break
        leaf_idx, feats = chosen
        f = int(rng.choice(feats))
        box = boxes.pop(leaf_idx)
        lo = max(box.lower[f], -3.0)
        hi = min(box.upper[f], 3.0)
        tau = float(rng.uniform(lo, hi))
        left, right = len(nodes), len(nodes) + 1
        nodes.append(("leaf", int(rng.integers(1, 4))))
        nodes.append(("leaf", int(rng.integers(1, 4))))
        nodes[leaf_idx] = ("split", f, tau, left, right)
        boxes[left] = box.refined(f, "<=", tau)
        boxes[right] = box.refined(f, ">", tau)
        leaves.remove(leaf_idx)
        leaves.extend([left, right])
    built = []
    for node in nodes:
        if node[0] == "split":
            built.append(Split(feature=node[1], threshold=node[2], left=node[3], right=node[4]))
        else:
            label = node[1] if task == "classification" else float(node[1])
            built.append(Leaf(label=label))
    return DecisionTree(task=task, feature_names=names, nodes=tuple(built))


def random_gmm(rng: np.random.Generator, dimension: int, components: int) -> DiagonalGMM:
    weights = rng.uniform(0.2, 1.0, size=components)
    weights = weights / weights.sum()
    means = rng.uniform(-3.0, 3.0, size=(components, dimension))
    stds = rng.uniform(0.3, 2.0, size=(components, dimension))
    return DiagonalGMM(weights=weights, means=means, stds=stds)


def random_box(rng: np.random.Generator, dimension: int) -> BoxConstraint:
    intervals = []
    for _ in range(dimension):
        kind = rng.integers(0, 4)
        if kind == 0:
            intervals.append((-math.inf, math.inf))
        elif kind == 1:
            intervals.append((-math.inf, float(rng.uniform(-2, 4))))
        elif kind == 2:
            intervals.append((float(rng.uniform(-4, 2)), math.inf))
        else:
            lo = float(rng.uniform(-4, 3))
            intervals.append((lo, lo + float(rng.uniform(0.5, 4.0))))
    return BoxConstraint.from_intervals(intervals)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
