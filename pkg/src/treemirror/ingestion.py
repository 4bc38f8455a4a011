"""CSV ingestion: numeric design matrix plus a schema manifest, and splits.

Categorical columns are one-hot encoded (ordinal codes would impose fake
orderings on axis-aligned splits), two-level columns become {0,1}
indicators, and missing cells are rejected rather than imputed since an
imputation step would silently change the model under audit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BINARY, NUMERIC, FeatureSpace
from .errors import DataError, DomainError

CATEGORICAL = "categorical"
MAX_LEVELS = 32


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # numeric | binary | categorical
    levels: tuple[str, ...] | None = None  # categorical / binary level order

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "levels": list(self.levels) if self.levels else None,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ColumnSpec":
        levels = doc.get("levels")
        return cls(
            name=doc["name"], kind=doc["kind"], levels=tuple(levels) if levels else None
        )


@dataclass(frozen=True)
class SchemaManifest:
    """How each source column maps into the encoded feature space."""

    columns: tuple[ColumnSpec, ...]
    response: ColumnSpec
    task: str
    feature_names: tuple[str, ...]
    feature_kinds: tuple[str, ...]
    class_names: tuple[str, ...] | None = None  # classification: code i+1 -> name

    @property
    def feature_space(self) -> FeatureSpace:
        return FeatureSpace(self.feature_names, self.feature_kinds)

    def to_json_dict(self) -> dict:
        return {
            "columns": [c.to_json_dict() for c in self.columns],
            "response": self.response.to_json_dict(),
            "task": self.task,
            "feature_names": list(self.feature_names),
            "feature_kinds": list(self.feature_kinds),
            "class_names": list(self.class_names) if self.class_names else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SchemaManifest":
        return cls(
            columns=tuple(ColumnSpec.from_json_dict(c) for c in doc["columns"]),
            response=ColumnSpec.from_json_dict(doc["response"]),
            task=doc["task"],
            feature_names=tuple(doc["feature_names"]),
            feature_kinds=tuple(doc["feature_kinds"]),
            class_names=tuple(doc["class_names"]) if doc.get("class_names") else None,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SchemaManifest":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def decode_row(self, x: Sequence[float]) -> dict[str, object]:
        """Reverse the encoding of one feature row back to column values."""
        x = list(x)
        out: dict[str, object] = {}
        pos = 0
        for col in self.columns:
            if col.kind == NUMERIC:
                out[col.name] = x[pos]
                pos += 1
            elif col.kind == BINARY:
                assert col.levels is not None
                out[col.name] = col.levels[int(round(x[pos]))]
                pos += 1
            else:
                assert col.levels is not None
                block = x[pos : pos + len(col.levels)]
                out[col.name] = col.levels[int(np.argmax(block))]
                pos += len(col.levels)
        return out


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    manifest: SchemaManifest

    @property
    def task(self) -> str:
        return self.manifest.task

    @property
    def feature_space(self) -> FeatureSpace:
        return self.manifest.feature_space


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _infer_kind(values: list[str]) -> str:
    distinct = sorted(set(values))
    if all(_is_float(v) for v in values):
        if len(distinct) > 1 and set(float(v) for v in distinct) <= {0.0, 1.0}:
            return BINARY
        return NUMERIC
    if len(distinct) == 2:
        return BINARY
    if len(distinct) > MAX_LEVELS:
        raise DataError(
            f"non-numeric column with {len(distinct)} levels exceeds the "
            f"{MAX_LEVELS}-level limit"
        )
    return CATEGORICAL


def load_csv(
    path: str | Path,
    response: str,
    kind_hints: dict[str, str] | None = None,
    task: str | None = None,
) -> tuple[Dataset, SchemaManifest]:
    """Read a headered CSV into a numeric matrix plus its manifest."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            if cell.strip() == "":
                raise DataError(
                    f"{path}: missing value at row {i + 2}, column {header[j]!r}"
                )
    if response not in header:
        raise DataError(f"{path}: unknown response column {response!r}")

    hints = dict(kind_hints or {})
    columns: list[ColumnSpec] = []
    feature_names: list[str] = []
    feature_kinds: list[str] = []
    blocks: list[np.ndarray] = []

    for j, name in enumerate(header):
        if name == response:
            continue
        values = [row[j] for row in rows]
        kind = hints.get(name) or _infer_kind(values)
        if kind == NUMERIC:
            if not all(_is_float(v) for v in values):
                raise DataError(f"{path}: column {name!r} has non-numeric cells")
            blocks.append(np.asarray([float(v) for v in values])[:, None])
            columns.append(ColumnSpec(name=name, kind=NUMERIC))
            feature_names.append(name)
            feature_kinds.append(NUMERIC)
        elif kind == BINARY:
            levels = tuple(sorted(set(values)))
            if len(levels) != 2:
                raise DataError(f"{path}: column {name!r} is not two-valued")
            mapping = {levels[0]: 0.0, levels[1]: 1.0}
            blocks.append(np.asarray([mapping[v] for v in values])[:, None])
            columns.append(ColumnSpec(name=name, kind=BINARY, levels=levels))
            feature_names.append(name)
            feature_kinds.append(BINARY)
        elif kind == CATEGORICAL:
            levels = tuple(sorted(set(values)))
            block = np.zeros((len(values), len(levels)))
            index = {lvl: k for k, lvl in enumerate(levels)}
            for r, v in enumerate(values):
                block[r, index[v]] = 1.0
            blocks.append(block)
            columns.append(ColumnSpec(name=name, kind=CATEGORICAL, levels=levels))
            feature_names.extend(f"{name}={lvl}" for lvl in levels)
            feature_kinds.extend(BINARY for _ in levels)
        else:
            raise DataError(f"unknown kind hint {kind!r} for column {name!r}")

    resp_idx = header.index(response)
    resp_values = [row[resp_idx] for row in rows]
    resolved_task = task
    if resolved_task is None:
        numeric_resp = all(_is_float(v) for v in resp_values)
        if numeric_resp and len(set(resp_values)) > max(10, MAX_LEVELS):
            resolved_task = "regression"
        elif numeric_resp and all(float(v) == int(float(v)) for v in resp_values):
            resolved_task = "classification"
        elif numeric_resp:
            resolved_task = "regression"
        else:
            resolved_task = "classification"
    if resolved_task == "regression":
        if not all(_is_float(v) for v in resp_values):
            raise DataError(f"{path}: regression response has non-numeric cells")
        y = np.asarray([float(v) for v in resp_values])
        class_names = None
        resp_spec = ColumnSpec(name=response, kind=NUMERIC)
    else:
        levels = tuple(sorted(set(resp_values)))
        if len(levels) < 2:
            raise DataError(f"{path}: classification response has a single class")
        index = {lvl: k + 1 for k, lvl in enumerate(levels)}  # classes 1..m
        y = np.asarray([index[v] for v in resp_values], dtype=np.int64)
        class_names = levels
        resp_spec = ColumnSpec(name=response, kind=CATEGORICAL, levels=levels)

    manifest = SchemaManifest(
        columns=tuple(columns),
        response=resp_spec,
        task=resolved_task,
        feature_names=tuple(feature_names),
        feature_kinds=tuple(feature_kinds),
        class_names=class_names,
    )
    X = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    if X.shape[1] == 0:
        raise DataError(f"{path}: no feature columns besides the response")
    return Dataset(X=X, y=y, manifest=manifest), manifest


def _split_indices(
    y: np.ndarray, task: str, test_fraction: float, seed: int
) -> tuple[list[int], list[int]]:
    if not 0.0 < test_fraction < 1.0:
        raise DomainError("test fraction must lie strictly between 0 and 1")
    n = y.shape[0]
    target_total = int(round(test_fraction * n))
    if target_total == 0 or target_total == n:
        raise DataError("split would leave an empty side")
    rng = np.random.default_rng(seed)

    if task == "classification":
        test_idx: list[int] = []
        train_idx: list[int] = []
        classes = np.unique(y)
        quotas: list[tuple[float, int, np.ndarray]] = []
        for c in classes:
            members = np.flatnonzero(y == c)
            members = members[rng.permutation(members.size)]
            exact = test_fraction * members.size
            quotas.append((exact - int(exact), int(exact), members))
        assigned = sum(q[1] for q in quotas)
        # largest-remainder rounding so the overall count is exact
        order = sorted(range(len(quotas)), key=lambda i: (-quotas[i][0], i))
        bump = {order[i] for i in range(min(target_total - assigned, len(order)))}
        for i, (_, base, members) in enumerate(quotas):
            take = base + (1 if i in bump else 0)
            take = min(take, members.size)
            test_idx.extend(members[:take].tolist())
            train_idx.extend(members[take:].tolist())
        test_idx.sort()
        train_idx.sort()
    else:
        perm = rng.permutation(n)
        test_idx = sorted(perm[:target_total].tolist())
        train_idx = sorted(perm[target_total:].tolist())

    if not test_idx or not train_idx:
        raise DataError("split would leave an empty side")
    return train_idx, test_idx


def split_dataset(
    dataset: Dataset, test_fraction: float, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive, seeded split; stratified for classification."""
    train_idx, test_idx = _split_indices(dataset.y, dataset.task, test_fraction, seed)

    def take(idx: list[int]) -> Dataset:
        return Dataset(X=dataset.X[idx], y=dataset.y[idx], manifest=dataset.manifest)

    return take(train_idx), take(test_idx)


def split_csv(
    path: str | Path,
    response: str,
    test_fraction: float,
    seed: int = 0,
    kind_hints: dict[str, str] | None = None,
    task: str | None = None,
) -> tuple[list[list[str]], list[list[str]], list[str]]:
    """Split a CSV row-wise with the same seeded stratified quotas.

    Returns (train rows, test rows, header) with the original cells
    untouched, so re-encoding cannot drift between the two sides.
    """
    dataset, _ = load_csv(path, response, kind_hints=kind_hints, task=task)
    train_idx, test_idx = _split_indices(
        dataset.y, dataset.task, test_fraction, seed
    )
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return [rows[i] for i in train_idx], [rows[i] for i in test_idx], header
