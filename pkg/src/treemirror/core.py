"""Feature spaces, axis-aligned box constraints, and small decision trees.

Everything here is an immutable value type. Trees are stored as pre-order
node arrays with explicit child indices, so a node handle is just the index
into the array and serialization is a flat list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, DomainError

NUMERIC = "numeric"
BINARY = "binary"

LEQ = "<="
GT = ">"

#: One branch condition: (feature index, "<=" or ">", bound).
Atom = tuple[int, str, float]

# Binary-indicator features are only ever split here, keeping trees readable.
BINARY_THRESHOLD = 0.5


@dataclass(frozen=True)
class FeatureSpace:
    """Named input dimensions, each numeric or a {0,1} indicator."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 1:
            raise DomainError("a feature space needs at least one dimension")
        if len(set(self.names)) != len(self.names):
            raise DomainError("feature names must be unique")
        if len(self.kinds) != len(self.names):
            raise DomainError("one kind per feature required")
        bad = [k for k in self.kinds if k not in (NUMERIC, BINARY)]
        if bad:
            raise DomainError(f"unknown feature kinds: {bad}")

    @classmethod
    def numeric(cls, names: Sequence[str]) -> "FeatureSpace":
        return cls(tuple(names), tuple(NUMERIC for _ in names))

    @property
    def dimension(self) -> int:
        return len(self.names)

    def binary_features(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k == BINARY)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DomainError(f"unknown feature {name!r}") from None


@dataclass(frozen=True)
class BoxConstraint:
    """Conjunction of per-dimension intervals, lower bounds optionally strict.

    A lower bound produced by a ``>`` branch is strict; intervals supplied
    directly (e.g. for conditioning on a value range) are closed. The
    canonical empty constraint is a distinguished value rather than any
    particular inverted interval.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    lower_strict: tuple[bool, ...]
    empty: bool = False

    @classmethod
    def full(cls, dimension: int) -> "BoxConstraint":
        return cls(
            lower=tuple(-math.inf for _ in range(dimension)),
            upper=tuple(math.inf for _ in range(dimension)),
            lower_strict=tuple(False for _ in range(dimension)),
        )

    @classmethod
    def empty_box(cls, dimension: int) -> "BoxConstraint":
        return cls(
            lower=tuple(math.inf for _ in range(dimension)),
            upper=tuple(-math.inf for _ in range(dimension)),
            lower_strict=tuple(False for _ in range(dimension)),
            empty=True,
        )

    @classmethod
    def from_intervals(
        cls, intervals: Sequence[tuple[float, float]]
    ) -> "BoxConstraint":
        """Closed box from per-dimension (lower, upper) pairs."""
        lower = tuple(float(lo) for lo, _ in intervals)
        upper = tuple(float(hi) for _, hi in intervals)
        strict = tuple(False for _ in intervals)
        if any(lo > hi for lo, hi in zip(lower, upper)):
            return cls.empty_box(len(intervals))
        return cls(lower, upper, strict)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @cached_property
    def _lower_arr(self) -> np.ndarray:
        a = np.asarray(self.lower, dtype=np.float64)
        a.flags.writeable = False
        return a

    @cached_property
    def _upper_arr(self) -> np.ndarray:
        a = np.asarray(self.upper, dtype=np.float64)
        a.flags.writeable = False
        return a

    @cached_property
    def _strict_arr(self) -> np.ndarray:
        a = np.asarray(self.lower_strict, dtype=bool)
        a.flags.writeable = False
        return a

    def refined(self, feature: int, direction: str, bound: float) -> "BoxConstraint":
        """Intersect with one more branch atom; may collapse to EMPTY."""
        if self.empty:
            return self
        if not 0 <= feature < self.dimension:
            raise DomainError(f"feature index {feature} out of range")
        lower = list(self.lower)
        upper = list(self.upper)
        strict = list(self.lower_strict)
        bound = float(bound)
        if direction == LEQ:
            upper[feature] = min(upper[feature], bound)
        elif direction == GT:
            if bound > lower[feature] or (bound == lower[feature] and not strict[feature]):
                lower[feature] = bound
                strict[feature] = True
        else:
            raise DomainError(f"unknown branch direction {direction!r}")
        lo, hi = lower[feature], upper[feature]
        if lo > hi or (lo == hi and strict[feature]):
            return BoxConstraint.empty_box(self.dimension)
        return BoxConstraint(tuple(lower), tuple(upper), tuple(strict))

    def contains(self, x: Sequence[float]) -> bool:
        if self.empty:
            raise DomainError("membership is undefined for the EMPTY constraint")
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise DimensionMismatch(
                f"point has shape {x.shape}, constraint has dimension {self.dimension}"
            )
        above = np.where(self._strict_arr, x > self._lower_arr, x >= self._lower_arr)
        return bool(np.all(above) and np.all(x <= self._upper_arr))

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        if self.empty:
            raise DomainError("membership is undefined for the EMPTY constraint")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise DimensionMismatch(
                f"batch has shape {X.shape}, constraint has dimension {self.dimension}"
            )
        above = np.where(self._strict_arr, X > self._lower_arr, X >= self._lower_arr)
        return np.all(above, axis=1) & np.all(X <= self._upper_arr, axis=1)

    def describe(self, names: Sequence[str] | None = None) -> str:
        if self.empty:
            return "EMPTY"
        parts = []
        for i in range(self.dimension):
            lo, hi, strict = self.lower[i], self.upper[i], self.lower_strict[i]
            if lo == -math.inf and hi == math.inf:
                continue
            name = names[i] if names is not None else f"x{i}"
            if lo == -math.inf:
                parts.append(f"{name} <= {hi:g}")
            elif hi == math.inf:
                op = ">" if strict else ">="
                parts.append(f"{name} {op} {lo:g}")
            else:
                lb = "(" if strict else "["
                parts.append(f"{name} in {lb}{lo:g}, {hi:g}]")
        return " and ".join(parts) if parts else "everything"


def simplify_constraint(atoms: Iterable[Atom], dimension: int) -> BoxConstraint:
    """Collapse a conjunction of branch atoms to one interval per dimension.

    The empty conjunction is the full-space box; an inverted interval on any
    dimension collapses the whole constraint to EMPTY.
    """
    box = BoxConstraint.full(dimension)
    for feature, direction, bound in atoms:
        if not 0 <= feature < dimension:
            raise DomainError(f"feature index {feature} out of range for d={dimension}")
        box = box.refined(feature, direction, bound)
        if box.empty:
            return BoxConstraint.empty_box(dimension)
    return box


@dataclass(frozen=True)
class Split:
    """Internal node: x[feature] <= threshold goes left, else right."""

    feature: int
    threshold: float
    left: int
    right: int


@dataclass(frozen=True)
class Leaf:
    label: Union[int, float]


Node = Union[Split, Leaf]


@dataclass(frozen=True)
class DecisionTree:
    """Axis-aligned binary tree over a named feature space.

    Nodes live in a pre-order array; index 0 is the root and a node handle
    is its array index.
    """

    task: str
    feature_names: tuple[str, ...]
    nodes: tuple[Node, ...]

    def __post_init__(self) -> None:
        if self.task not in ("classification", "regression"):
            raise DomainError(f"unknown task {self.task!r}")
        if not self.nodes:
            raise DomainError("a tree needs at least one node")
        seen = [0] * len(self.nodes)
        for idx, node in enumerate(self.nodes):
            if isinstance(node, Split):
                if not 0 <= node.feature < self.dimension:
                    raise DomainError(f"node {idx}: feature index out of range")
                for child in (node.left, node.right):
                    if not 0 <= child < len(self.nodes) or child == idx:
                        raise DomainError(f"node {idx}: child index {child} invalid")
                    seen[child] += 1
        if seen[0] != 0 or any(count != 1 for count in seen[1:]):
            raise DomainError("nodes must form a single tree rooted at index 0")

    # ------------------------------------------------------------------
    # basic structure
    # ------------------------------------------------------------------
    @property
    def dimension(self) -> int:
        return len(self.feature_names)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @cached_property
    def _parents(self) -> tuple[tuple[int, bool], ...]:
        # parent index and whether the node is its parent's left child
        parents: list[tuple[int, bool]] = [(-1, False)] * len(self.nodes)
        for idx, node in enumerate(self.nodes):
            if isinstance(node, Split):
                parents[node.left] = (idx, True)
                parents[node.right] = (idx, False)
        return tuple(parents)

    def leaf_ids(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if isinstance(n, Leaf))

    def internal_ids(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if isinstance(n, Split))

    def depth_of(self, node_id: int) -> int:
        self._check_node(node_id)
        depth = 0
        while node_id != 0:
            node_id = self._parents[node_id][0]
            depth += 1
        return depth

    def features_used(self, max_depth: int | None = None) -> tuple[int, ...]:
        used = sorted(
            {
                n.feature
                for i, n in enumerate(self.nodes)
                if isinstance(n, Split)
                and (max_depth is None or self.depth_of(i) <= max_depth)
            }
        )
        return tuple(used)

    def _check_node(self, node_id: int) -> None:
        if not isinstance(node_id, (int, np.integer)) or not 0 <= node_id < len(self.nodes):
            raise DomainError(f"node handle {node_id!r} does not belong to this tree")

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def predict_one(self, x: Sequence[float]) -> Union[int, float]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise DimensionMismatch(
                f"point has shape {x.shape}, tree expects dimension {self.dimension}"
            )
        node = self.nodes[0]
        while isinstance(node, Split):
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node.label

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Vectorized batch prediction by routing index sets down the tree."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise DimensionMismatch(
                f"batch has shape {X.shape}, tree expects dimension {self.dimension}"
            )
        dtype = np.float64 if self.task == "regression" else np.int64
        out = np.empty(X.shape[0], dtype=dtype)
        stack: list[tuple[int, np.ndarray]] = [(0, np.arange(X.shape[0]))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if isinstance(node, Leaf):
                out[rows] = node.label
            else:
                goes_left = X[rows, node.feature] <= node.threshold
                left_rows = rows[goes_left]
                right_rows = rows[~goes_left]
                if left_rows.size:
                    stack.append((node.left, left_rows))
                if right_rows.size:
                    stack.append((node.right, right_rows))
        return out

    def path_constraint(self, node_id: int) -> BoxConstraint:
        """Box of points that reach ``node_id``; the root gets the full box."""
        self._check_node(node_id)
        atoms: list[Atom] = []
        current = int(node_id)
        while current != 0:
            parent, is_left = self._parents[current]
            split = self.nodes[parent]
            assert isinstance(split, Split)
            atoms.append((split.feature, LEQ if is_left else GT, split.threshold))
            current = parent
        return simplify_constraint(reversed(atoms), self.dimension)

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json_dict(self) -> dict:
        nodes = []
        for node in self.nodes:
            if isinstance(node, Split):
                nodes.append(
                    {
                        "kind": "split",
                        "feature": node.feature,
                        "threshold": node.threshold,
                        "left": node.left,
                        "right": node.right,
                    }
                )
            else:
                label = node.label
                nodes.append({"kind": "leaf", "label": label})
        return {
            "task": self.task,
            "feature_names": list(self.feature_names),
            "nodes": nodes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DecisionTree":
        try:
            task = doc["task"]
            names = tuple(str(n) for n in doc["feature_names"])
            raw_nodes = doc["nodes"]
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed tree document: {exc}") from exc
        nodes: list[Node] = []
        for raw in raw_nodes:
            if raw.get("kind") == "split":
                nodes.append(
                    Split(
                        feature=int(raw["feature"]),
                        threshold=float(raw["threshold"]),
                        left=int(raw["left"]),
                        right=int(raw["right"]),
                    )
                )
            elif raw.get("kind") == "leaf":
                label = raw["label"]
                if task == "classification":
                    label = int(label)
                else:
                    label = float(label)
                nodes.append(Leaf(label=label))
            else:
                raise DomainError(f"unknown node kind {raw.get('kind')!r}")
        return cls(task=task, feature_names=names, nodes=tuple(nodes))

    @classmethod
    def from_json(cls, text: str) -> "DecisionTree":
        return cls.from_json_dict(json.loads(text))

    def to_dot(self) -> str:
        """Graphviz source with yes/no edges for each split."""
        lines = ["digraph tree {", "  node [shape=box];"]
        for idx, node in enumerate(self.nodes):
            if isinstance(node, Split):
                name = self.feature_names[node.feature]
                lines.append(f'  n{idx} [label="{name} <= {node.threshold:g}"];')
                lines.append(f'  n{idx} -> n{node.left} [label="yes"];')
                lines.append(f'  n{idx} -> n{node.right} [label="no"];')
            else:
                lines.append(f'  n{idx} [label="{node.label}", shape=ellipse];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def rules(self) -> list[str]:
        """One root-to-leaf rule per line, in leaf array order."""
        out = []
        for leaf_id in self.leaf_ids():
            box = self.path_constraint(leaf_id)
            label = self.nodes[leaf_id].label  # type: ignore[union-attr]
            out.append(f"IF {box.describe(self.feature_names)} THEN {label}")
        return out


def single_leaf_tree(
    task: str, feature_names: Sequence[str], label: Union[int, float]
) -> DecisionTree:
    return DecisionTree(
        task=task, feature_names=tuple(feature_names), nodes=(Leaf(label=label),)
    )
