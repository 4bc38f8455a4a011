"""Seeded synthetic datasets at desk scale for self-contained runs.

Real benchmark tables are not bundled; these generators produce data with
the same shape and difficulty so the whole pipeline can be exercised and
compared end to end without downloads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SyntheticData:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    response: str
    task: str

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + [self.response])
            for row, label in zip(self.X, self.y):
                cells = [repr(float(v)) for v in row]
                if self.task == "classification":
                    cells.append(str(int(label)))
                else:
                    cells.append(repr(float(label)))
                writer.writerow(cells)


def wine_like(rows: int = 178, seed: int = 0) -> SyntheticData:
    """Three-class, 13-feature table shaped like a small chemistry panel.

    Inputs come from three overlapping axis-aligned clusters, but the class
    boundary is tilted by a dense linear cut through each cluster. Small
    trees fit from a handful of rows underfit that boundary, while a model
    that can be queried densely resolves it.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    d, n_classes = 13, 3
    const = np.random.default_rng(np.random.SeedSequence(entropy=7, spawn_key=(13,)))
    centers = const.normal(scale=1.5, size=(n_classes, d))
    widths = const.uniform(0.8, 1.5, size=(n_classes, d))
    cut = const.normal(size=(n_classes, d))
    counts = [rows // n_classes + (1 if k < rows % n_classes else 0) for k in range(n_classes)]
    comp = np.concatenate([np.full(c, k) for k, c in enumerate(counts)])
    comp = comp[rng.permutation(rows)]
    X = centers[comp] + rng.normal(size=(rows, d)) * widths[comp]
    raw = X @ cut.T
    raw = (raw - raw.mean(axis=0)) / raw.std(axis=0)
    scores = 0.65 * raw + 1.05 * np.eye(n_classes)[comp]
    y = (np.argmax(scores, axis=1) + 1).astype(np.int64)
    names = tuple(f"panel_{i:02d}" for i in range(d))
    return SyntheticData(
        X=X, y=y, feature_names=names, response="origin", task="classification"
    )


def grades_like(
    rows: int = 400, seed: int = 0, gender_effect: float = 0.5
) -> SyntheticData:
    """Regression table with two prior grades, a failure count, an indicator.

    The response carries a known additive shift of ``gender_effect`` on the
    indicator, which dependence audits should recover.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(202,)))
    g1 = rng.normal(loc=11.0, scale=3.0, size=rows)
    g2 = 0.7 * g1 + rng.normal(loc=3.0, scale=1.5, size=rows)
    failures = rng.integers(0, 4, size=rows).astype(np.float64)
    gender = rng.integers(0, 2, size=rows).astype(np.float64)
    y = (
        0.55 * g1
        + 0.35 * g2
        - 0.8 * failures
        + gender_effect * gender
        + rng.normal(scale=1.0, size=rows)
    )
    X = np.column_stack([g1, g2, failures, gender])
    return SyntheticData(
        X=X,
        y=y,
        feature_names=("grade_prev1", "grade_prev2", "failures", "gender"),
        response="grade_final",
        task="regression",
    )


def leaky_labels(rows: int = 178, seed: int = 0, noise: float = 0.05) -> SyntheticData:
    """Binary task with the response leaked into a feature, lightly jittered.

    Models trained on this table latch onto the leak, and extraction should
    expose it.
    """
    base = wine_like(rows=rows, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(303,)))
    y = (base.y > 1).astype(np.int64) + 1  # collapse to classes {1, 2}
    leak = y.astype(np.float64) + rng.normal(scale=noise, size=rows)
    X = np.column_stack([base.X, leak])
    names = base.feature_names + ("months_to_event",)
    return SyntheticData(
        X=X, y=y, feature_names=names, response="recurrence", task="classification"
    )


def cartpole_states(rows: int = 10_000, seed: int = 0) -> SyntheticData:
    """States visited by the built-in cart-pole expert, with its actions.

    Feeds the mixture fit for policy distillation; the action column doubles
    as a response so the file round-trips through the loader.
    """
    from .cartpole import STATE_FEATURES, collect_states, expert_policy

    episodes = max(1, math.ceil(rows / 201))
    states = collect_states(expert_policy, episodes=episodes, seed=seed)
    states = states[:rows]
    actions = np.asarray([expert_policy(row) for row in states], dtype=np.int64)
    return SyntheticData(
        X=states,
        y=actions,
        feature_names=STATE_FEATURES,
        response="action",
        task="classification",
    )


PRESETS = {
    "wine": wine_like,
    "grades": grades_like,
    "leak": leaky_labels,
    "cartpole-states": cartpole_states,
}


def make_preset(name: str, rows: int, seed: int) -> SyntheticData:
    try:
        generator = PRESETS[name]
    except KeyError:
        raise DomainError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None
    return generator(rows=rows, seed=seed)
