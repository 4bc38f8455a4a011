"""Diagonal Gaussian mixtures: EM fitting, boxed masses, conditioned sampling.

The mixture is the sampling distribution for tree extraction. Because the
components are axis-aligned, the mass of a box factors into products of 1-D
standard-normal CDF differences, and sampling inside a box reduces to
per-dimension truncated normals.

Numerical conventions:

* Phi and its inverse are the double-precision erf-based routines from
  ``scipy.special`` (``ndtr`` / ``ndtri``).
* CDF differences for intervals on the positive side are computed in the
  survival domain, ``ndtr(-a) - ndtr(-b)``, which avoids cancellation
  between two values near 1.
* Truncated sampling uses the inverse CDF on the truncated uniform range
  for ordinary intervals, and switches to a one-sided exponential-proposal
  rejection sampler once the whole interval lies beyond 6 sigma, where CDF
  differences stop being trustworthy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .core import BoxConstraint
from .errors import DomainError, ZeroMassRegion

# Standardized distance beyond which the rejection sampler takes over.
TAIL_CUTOFF = 6.0

# Smallest total box mass still treated as positive.
MASS_EPS = 1e-300

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def _as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalGMM:
    """Mixture of axis-aligned Gaussians: weights, means, per-dim stds."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    stds: np.ndarray  # (K, d)
    feature_names: tuple[str, ...] | None = None
    fit_config: dict | None = field(default=None, compare=False)
    bic: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.stds, dtype=np.float64)
        if m.ndim != 2 or s.shape != m.shape or w.shape != (m.shape[0],):
            raise DomainError("inconsistent mixture parameter shapes")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise DomainError("mixture weights must be nonnegative and sum to 1")
        if np.any(s <= 0):
            raise DomainError("component standard deviations must be positive")
        for arr in (w, m, s):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    def log_pdf(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        comp = _component_log_pdf(X, self.means, self.stds)
        comp += np.log(self.weights)[None, :]
        return _logsumexp(comp, axis=1)

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "K": self.n_components,
            "d": self.dimension,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "feature_names": list(self.feature_names) if self.feature_names else None,
            "fit_config": self.fit_config,
            "bic": self.bic,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DiagonalGMM":
        names = doc.get("feature_names")
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            means=np.asarray(doc["means"], dtype=np.float64),
            stds=np.asarray(doc["stds"], dtype=np.float64),
            feature_names=tuple(names) if names else None,
            fit_config=doc.get("fit_config"),
            bic=doc.get("bic"),
        )

    @classmethod
    def from_json(cls, text: str) -> "DiagonalGMM":
        return cls.from_json_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DiagonalGMM":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# EM fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EMConfig:
    max_iter: int = 300
    tol: float = 1e-8
    var_floor_scale: float = 1e-6
    restarts: int = 4
    seed: int = 0


def variance_floor(X: np.ndarray, scale: float) -> np.ndarray:
    """Per-dimension floor on sigma: ``scale`` times the data range.

    Dimensions with zero range fall back to ``scale`` itself so degenerate
    clusters still get a positive width.
    """
    span = X.max(axis=0) - X.min(axis=0)
    return np.where(span > 0, scale * span, scale)


def _component_log_pdf(X: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    # (n, K) log densities, summed over independent dimensions
    z = (X[:, None, :] - means[None, :, :]) / stds[None, :, :]
    return -0.5 * np.sum(z * z, axis=2) - np.sum(np.log(stds), axis=1)[None, :] - (
        0.5 * X.shape[1] * math.log(2.0 * math.pi)
    )


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    hi = np.max(a, axis=axis, keepdims=True)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    return np.squeeze(hi, axis=axis) + np.log(
        np.sum(np.exp(a - hi), axis=axis)
    )


def _kmeanspp_means(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(1, K):
        d2 = np.min(
            [np.sum((X - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        probs = d2 / total
        centers.append(X[rng.choice(n, p=probs)])
    return np.asarray(centers, dtype=np.float64)


def _initial_params(
    X: np.ndarray, K: int, rng: np.random.Generator, floor: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = _kmeanspp_means(X, K, rng)
    assign = np.argmin(
        np.sum((X[:, None, :] - means[None, :, :]) ** 2, axis=2), axis=1
    )
    global_std = np.maximum(X.std(axis=0), floor)
    stds = np.empty_like(means)
    for j in range(K):
        members = X[assign == j]
        if members.shape[0] >= 2:
            stds[j] = np.maximum(members.std(axis=0), floor)
        else:
            stds[j] = global_std
    weights = np.full(K, 1.0 / K)
    return weights, means, stds


def _em_run(
    X: np.ndarray,
    K: int,
    rng: np.random.Generator,
    floor: np.ndarray,
    cfg: EMConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[float]]:
    """One EM run; returns parameters and the per-iteration log-likelihoods."""
    n = X.shape[0]
    weights, means, stds = _initial_params(X, K, rng, floor)
    trace: list[float] = []
    prev = -math.inf
    for _ in range(cfg.max_iter):
        log_comp = _component_log_pdf(X, means, stds) + np.log(weights)[None, :]
        log_norm = _logsumexp(log_comp, axis=1)
        ll = float(log_norm.sum())
        trace.append(ll)
        if ll - prev <= cfg.tol * (1.0 + abs(ll)) and len(trace) > 1:
            break
        prev = ll
        resp = np.exp(log_comp - log_norm[:, None])
        nk = resp.sum(axis=0)
        nk_safe = np.maximum(nk, 1e-12)
        weights = nk / n
        weights = weights / weights.sum()
        means = (resp.T @ X) / nk_safe[:, None]
        sq = (resp.T @ (X * X)) / nk_safe[:, None] - means * means
        stds = np.sqrt(np.maximum(sq, 0.0))
        stds = np.maximum(stds, floor)
    return weights, means, stds, trace


def fit_em(
    X: np.ndarray,
    n_components: int,
    cfg: EMConfig | None = None,
    feature_names: Sequence[str] | None = None,
) -> DiagonalGMM:
    """Fit a diagonal mixture by EM, keeping the best of several restarts."""
    cfg = cfg or EMConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DomainError("training data must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise DomainError("training data contains non-finite values")
    n, d = X.shape
    if n_components < 1 or n < n_components:
        raise DomainError(
            f"need at least as many rows ({n}) as components ({n_components})"
        )
    floor = variance_floor(X, cfg.var_floor_scale)
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(cfg.restarts, 1))
    best: tuple[float, tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None
    for child in seeds:
        rng = np.random.default_rng(child)
        weights, means, stds, trace = _em_run(X, n_components, rng, floor, cfg)
        if best is None or trace[-1] > best[0]:
            best = (trace[-1], (weights, means, stds))
    assert best is not None
    ll, (weights, means, stds) = best
    n_params = (n_components - 1) + 2 * n_components * d
    bic = -2.0 * ll + n_params * math.log(n)
    return DiagonalGMM(
        weights=weights,
        means=means,
        stds=stds,
        feature_names=tuple(feature_names) if feature_names else None,
        fit_config={
            "n_components": n_components,
            "max_iter": cfg.max_iter,
            "tol": cfg.tol,
            "var_floor_scale": cfg.var_floor_scale,
            "restarts": cfg.restarts,
            "seed": cfg.seed,
            "log_likelihood": ll,
            "n_rows": n,
        },
        bic=bic,
    )


def fit_em_bic(
    X: np.ndarray,
    k_max: int = 10,
    cfg: EMConfig | None = None,
    feature_names: Sequence[str] | None = None,
) -> DiagonalGMM:
    """Fit K = 1..k_max and keep the model with the lowest BIC."""
    X = np.asarray(X, dtype=np.float64)
    upper = min(k_max, X.shape[0])
    if upper < 1:
        raise DomainError("empty training data")
    candidates = [
        fit_em(X, k, cfg=cfg, feature_names=feature_names) for k in range(1, upper + 1)
    ]
    return min(candidates, key=lambda g: g.bic)


# ---------------------------------------------------------------------------
# boxed masses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalWeights:
    """Component weights of the mixture restricted to a box."""

    phi: np.ndarray  # (K,) normalized
    total_mass: float  # Z, the box mass under the mixture
    interval_masses: np.ndarray  # (K, d) per-component per-dimension masses


def _phi_interval_masses(g: DiagonalGMM, box: BoxConstraint) -> np.ndarray:
    lo = np.asarray(box.lower, dtype=np.float64)
    hi = np.asarray(box.upper, dtype=np.float64)
    a = (lo[None, :] - g.means) / g.stds
    b = (hi[None, :] - g.means) / g.stds
    # survival form on the positive side avoids 1-vs-1 cancellation
    direct = ndtr(b) - ndtr(a)
    survival = ndtr(-a) - ndtr(-b)
    mass = np.where(a > 0, survival, direct)
    return np.maximum(mass, 0.0)


def conditional_weights(g: DiagonalGMM, box: BoxConstraint) -> ConditionalWeights:
    """Exact component masses of ``g`` under ``box`` and their normalization.

    Raises :class:`ZeroMassRegion` when the whole box carries no mass; the
    caller must treat such a node as infeasible.
    """
    if box.empty:
        raise DomainError("conditional weights are undefined on the EMPTY constraint")
    if box.dimension != g.dimension:
        raise DomainError(
            f"box dimension {box.dimension} != mixture dimension {g.dimension}"
        )
    per_dim = _phi_interval_masses(g, box)
    unnormalized = g.weights * np.prod(per_dim, axis=1)
    total = float(unnormalized.sum())
    if not math.isfinite(total) or total < MASS_EPS:
        raise ZeroMassRegion(
            f"box has no probability mass under the mixture (Z={total!r})"
        )
    phi = unnormalized / total
    phi = phi / phi.sum()
    return ConditionalWeights(phi=phi, total_mass=total, interval_masses=per_dim)


# ---------------------------------------------------------------------------
# truncated-normal sampling
# ---------------------------------------------------------------------------


def _tail_rejection(
    rng: np.random.Generator, a: float, b: float, size: int
) -> np.ndarray:
    """Right-tail sampler on [a, b] with a >= TAIL_CUTOFF.

    Exponential proposal translated to ``a`` with the classic optimal rate;
    candidates beyond ``b`` are rejected. Never raises: after a generous
    number of rounds the near boundary is returned, which only triggers for
    intervals of vanishing relative mass.
    """
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    out = np.empty(size, dtype=np.float64)
    filled = 0
    for _ in range(10_000):
        m = size - filled
        if m == 0:
            break
        x = a + rng.exponential(scale=1.0 / lam, size=m)
        accept = rng.random(m) <= np.exp(-0.5 * (x - lam) ** 2)
        x = x[accept & (x <= b)]
        take = min(x.size, size - filled)
        out[filled : filled + take] = x[:take]
        filled += take
    if filled < size:
        out[filled:] = a
    return out


_U_LOW = 1e-300
_U_HIGH = float(np.nextafter(1.0, 0.0))


def _truncated_standard(
    rng: np.random.Generator, a: float, b: float, size: int
) -> np.ndarray:
    """Standard normal conditioned to [a, b], a < b allowed infinite."""
    if a >= TAIL_CUTOFF:
        return _tail_rejection(rng, a, b, size)
    if b <= -TAIL_CUTOFF:
        return -_tail_rejection(rng, -b, -a, size)
    if a > 0:
        # survival domain: u decreasing in x
        u_hi = float(ndtr(-a))
        u_lo = float(ndtr(-b))
        u = u_lo + (u_hi - u_lo) * rng.random(size)
        x = -ndtri(np.clip(u, _U_LOW, _U_HIGH))
    else:
        u_lo = float(ndtr(a))
        u_hi = float(ndtr(b))
        u = u_lo + (u_hi - u_lo) * rng.random(size)
        x = ndtri(np.clip(u, _U_LOW, _U_HIGH))
    return np.clip(x, a, b)


def truncated_normal(
    rng: np.random.Generator,
    mu: float,
    sigma: float,
    lower: float,
    upper: float,
    size: int,
) -> np.ndarray:
    """Draw ``size`` values of N(mu, sigma) restricted to [lower, upper]."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if not lower < upper:
        raise DomainError(f"truncation interval [{lower}, {upper}] is inverted")
    a = (lower - mu) / sigma
    b = (upper - mu) / sigma
    x = mu + sigma * _truncated_standard(rng, a, b, size)
    return np.clip(x, lower, upper)


def sample_truncated_normal(
    mu: float, sigma: float, lower: float, upper: float, rng: SeedLike
) -> float:
    """Single truncated-normal draw; see :func:`truncated_normal`."""
    return float(truncated_normal(_as_generator(rng), mu, sigma, lower, upper, 1)[0])


# ---------------------------------------------------------------------------
# conditional sampling from the mixture
# ---------------------------------------------------------------------------


def sample_conditional(
    g: DiagonalGMM, box: BoxConstraint, n: int, seed: SeedLike
) -> np.ndarray:
    """Draw n rows of the mixture conditioned to ``box``.

    Component indices come from the normalized boxed weights, then each
    dimension is an independent truncated normal. Rows always satisfy the
    box; samples landing exactly on a strict lower boundary are nudged one
    ulp inward so path-constraint membership stays exact.
    """
    if n < 1:
        raise DomainError("sample count must be positive")
    w = conditional_weights(g, box)
    rng = _as_generator(seed)
    cumulative = np.cumsum(w.phi)
    cumulative[-1] = 1.0
    comp = np.searchsorted(cumulative, rng.random(n), side="right")
    lo = np.asarray(box.lower)
    hi = np.asarray(box.upper)
    X = np.empty((n, g.dimension), dtype=np.float64)
    for j in range(g.n_components):
        rows = np.flatnonzero(comp == j)
        if rows.size == 0:
            continue
        for i in range(g.dimension):
            X[rows, i] = truncated_normal(
                rng, g.means[j, i], g.stds[j, i], lo[i], hi[i], rows.size
            )
    for i in range(g.dimension):
        if box.lower_strict[i] and math.isfinite(lo[i]):
            on_edge = X[:, i] == lo[i]
            if on_edge.any():
                X[on_edge, i] = np.nextafter(lo[i], math.inf)
    return X
