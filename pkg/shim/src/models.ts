/**
 * Model files the shim can serve.
 *
 * Two formats come from the host toolkit (consumed purely through their
 * JSON schemas): single decision trees {task, feature_names, nodes} and
 * bagged forests {task, feature_names, labels, trees}. Two tiny stub kinds
 * exist for fixtures: {"kind":"constant",...} and {"kind":"sign",...}.
 */

import { readFileSync } from "node:fs";
import type { Task } from "./protocol";

export interface Model {
  d: number;
  task: Task;
  labels: number[] | null;
  predictBatch(X: number[][]): number[];
}

// ---------------------------------------------------------------------------
// decision trees in the host JSON schema
// ---------------------------------------------------------------------------

type TreeNode =
  | { kind: "split"; feature: number; threshold: number; left: number; right: number }
  | { kind: "leaf"; label: number };

export interface TreeDoc {
  task: Task;
  feature_names: string[];
  nodes: TreeNode[];
}

export function predictTree(doc: TreeDoc, x: number[]): number {
  let node = doc.nodes[0];
  while (node.kind === "split") {
    node = doc.nodes[x[node.feature] <= node.threshold ? node.left : node.right];
  }
  return node.label;
}

function treeLabels(doc: TreeDoc): number[] {
  const seen = new Set<number>();
  for (const node of doc.nodes) {
    if (node.kind === "leaf") {
      seen.add(node.label);
    }
  }
  return [...seen].sort((a, b) => a - b);
}

function treeModel(doc: TreeDoc): Model {
  return {
    d: doc.feature_names.length,
    task: doc.task,
    labels: doc.task === "classification" ? treeLabels(doc) : null,
    predictBatch: (X) => X.map((row) => predictTree(doc, row)),
  };
}

// ---------------------------------------------------------------------------
// bagged forests in the host JSON schema
// ---------------------------------------------------------------------------

interface ForestDoc {
  task: Task;
  feature_names: string[];
  labels: number[] | null;
  trees: TreeNode[][];
}

function forestModel(doc: ForestDoc): Model {
  const trees: TreeDoc[] = doc.trees.map((nodes) => ({
    task: doc.task,
    feature_names: doc.feature_names,
    nodes,
  }));
  const labels =
    doc.task === "classification"
      ? doc.labels ?? [...new Set(trees.flatMap(treeLabels))].sort((a, b) => a - b)
      : null;
  const predictOne = (row: number[]): number => {
    const votes = trees.map((t) => predictTree(t, row));
    if (doc.task === "regression") {
      return votes.reduce((s, v) => s + v, 0) / votes.length;
    }
    const counts = new Map<number, number>();
    for (const v of votes) {
      counts.set(v, (counts.get(v) ?? 0) + 1);
    }
    let best = votes[0];
    let bestCount = -1;
    for (const label of labels ?? [...counts.keys()].sort((a, b) => a - b)) {
      const c = counts.get(label) ?? 0;
      if (c > bestCount) {
        best = label;
        bestCount = c;
      }
    }
    return best;
  };
  return {
    d: doc.feature_names.length,
    task: doc.task,
    labels,
    predictBatch: (X) => X.map(predictOne),
  };
}

// ---------------------------------------------------------------------------
// stubs for fixtures
// ---------------------------------------------------------------------------

interface ConstantStub {
  kind: "constant";
  d: number;
  task: Task;
  label: number;
}

interface SignStub {
  kind: "sign";
  d: number;
  feature: number;
}

function stubModel(doc: ConstantStub | SignStub): Model {
  if (doc.kind === "constant") {
    return {
      d: doc.d,
      task: doc.task,
      labels: doc.task === "classification" ? [doc.label] : null,
      predictBatch: (X) => X.map(() => doc.label),
    };
  }
  return {
    d: doc.d,
    task: "classification",
    labels: [0, 1],
    predictBatch: (X) => X.map((row) => (row[doc.feature] > 0 ? 1 : 0)),
  };
}

// ---------------------------------------------------------------------------
// loading
// ---------------------------------------------------------------------------

export function loadModel(path: string, taskOverride?: string): Model {
  const doc = JSON.parse(readFileSync(path, "utf-8"));
  let model: Model;
  if (doc.kind === "constant" || doc.kind === "sign") {
    model = stubModel(doc);
  } else if (Array.isArray(doc.trees)) {
    model = forestModel(doc);
  } else if (Array.isArray(doc.nodes)) {
    model = treeModel(doc);
  } else {
    throw new Error(`${path}: not a recognizable model file`);
  }
  if (taskOverride && taskOverride !== model.task) {
    throw new Error(
      `--task ${taskOverride} conflicts with the model's task ${model.task}`,
    );
  }
  return model;
}
