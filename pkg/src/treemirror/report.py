"""Report rendering: text tables, stable JSON/CSV, and figure files.

Every report lands as four siblings: ``<stem>.txt`` for reading,
``<stem>.json`` for machines, ``<stem>.csv`` where the content is tabular,
and ``<stem>.png`` with a matplotlib rendering. Output bytes are
deterministic for fixed inputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import (
    DependenceReport,
    FidelityReport,
    ModelComparison,
    OccurrenceReport,
)
from .cartpole import PolicyReport
from .core import DecisionTree


def write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _save_fig(fig, path: Path) -> None:
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# per-report writers
# ---------------------------------------------------------------------------


def write_fidelity_report(report: FidelityReport, outdir: Path, stem: str = "evaluate") -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_json_dict(), outdir / f"{stem}.json")
    lines = [
        f"task:             {report.task}",
        f"test points:      {report.n_test}",
        f"relative ({report.relative_metric}): {report.relative:.4f}",
    ]
    if report.absolute is not None:
        lines.append(f"absolute ({report.absolute_metric}): {report.absolute:.4f}")
    (outdir / f"{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    rows = [["relative", report.relative_metric, report.relative]]
    if report.absolute is not None:
        rows.append(["absolute", report.absolute_metric, report.absolute])
    _write_csv(outdir / f"{stem}.csv", ["kind", "metric", "value"], rows)

    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    labels = [r[0] for r in rows]
    values = [r[2] for r in rows]
    ax.bar(labels, values, color=["#4878d0", "#ee854a"][: len(values)])
    ax.set_ylabel(report.relative_metric)
    ax.set_title("surrogate quality")
    if report.task == "classification":
        ax.set_ylim(0, 1)
    fig.tight_layout()
    _save_fig(fig, outdir / f"{stem}.png")


def write_dependence_report(report: DependenceReport, outdir: Path, stem: str = "dependence") -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_json_dict(), outdir / f"{stem}.json")
    lines = [
        f"feature:        {report.feature_name} (index {report.feature})",
        f"overall effect: {report.overall.delta:.4f} (se {report.overall.se:.4f})",
        f"high/low means: {report.overall.high_mean:.4f} / {report.overall.low_mean:.4f}",
        "",
        f"{'node':>5} {'depth':>5} {'effect':>10} {'se':>8} {'prevalence':>11} {'share':>8}",
    ]
    rows = []
    for e in report.entries:
        lines.append(
            f"{e['node']:>5} {e['depth']:>5} {e['delta_n']:>10.4f} "
            f"{e['se']:>8.4f} {e['prevalence']:>11.4f} {e['share']:>8.4f}"
        )
        rows.append(
            [e["node"], e["depth"], e["delta_n"], e["se"], e["prevalence"], e["share"]]
        )
    if not report.entries:
        lines.append("(no tree node branches on this feature)")
    (outdir / f"{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_csv(
        outdir / f"{stem}.csv",
        ["node", "depth", "delta_n", "se", "prevalence", "share"],
        rows,
    )

    fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.0))
    axes[0].axhline(report.overall.delta, color="#d65f5f", label="overall")
    if rows:
        axes[0].bar([str(r[0]) for r in rows], [r[2] for r in rows], color="#4878d0")
    axes[0].set_xlabel("node")
    axes[0].set_ylabel("effect")
    axes[0].legend(fontsize=8)
    if rows:
        axes[1].bar([str(r[0]) for r in rows], [r[4] for r in rows], color="#6acc64")
    axes[1].set_xlabel("node")
    axes[1].set_ylabel("prevalence")
    fig.suptitle(f"dependence on {report.feature_name}")
    fig.tight_layout()
    _save_fig(fig, outdir / f"{stem}.png")


def write_occurrence_report(report: OccurrenceReport, outdir: Path, stem: str = "occurrence") -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_json_dict(), outdir / f"{stem}.json")
    lines = [
        f"feature index: {report.feature}",
        f"occurs in {report.n_occurring} of {report.n_trees} trees, "
        f"at the root in {report.n_at_root}",
        "",
        f"{'tree':>5} {'occurs':>7} {'min depth':>10}",
    ]
    rows = []
    for i, e in enumerate(report.per_tree):
        depth = e["min_depth"] if e["min_depth"] is not None else ""
        lines.append(f"{i:>5} {str(e['occurs']):>7} {str(depth):>10}")
        rows.append([i, e["occurs"], depth])
    (outdir / f"{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_csv(outdir / f"{stem}.csv", ["tree", "occurs", "min_depth"], rows)

    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    xs = list(range(report.n_trees))
    depths = [
        e["min_depth"] if e["occurs"] else None for e in report.per_tree
    ]
    present = [x for x, d in zip(xs, depths) if d is not None]
    ax.bar(present, [depths[x] + 1 for x in present], color="#4878d0")
    ax.set_xticks(xs)
    ax.set_xlabel("tree")
    ax.set_ylabel("1 + min depth of occurrence")
    ax.set_title(f"occurrences: {report.n_occurring}/{report.n_trees}")
    fig.tight_layout()
    _save_fig(fig, outdir / f"{stem}.png")


def write_comparison_report(report: ModelComparison, outdir: Path, stem: str = "comparison") -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_json_dict(), outdir / f"{stem}.json")
    lines = [f"{'model':>12} {'relative':>9} {'absolute':>9}  top features"]
    rows = []
    for r in report.rows:
        absolute = f"{r['absolute']:.4f}" if r["absolute"] is not None else "-"
        lines.append(
            f"{r['tag']:>12} {r['relative']:>9.4f} {absolute:>9}  {', '.join(r['top_features'])}"
        )
        rows.append([r["tag"], r["relative"], r["absolute"], ";".join(r["top_features"])])
    lines.append("")
    lines.append(f"shared top features:  {', '.join(report.shared_features) or '(none)'}")
    for tag, feats in report.distinct_features.items():
        if feats:
            lines.append(f"only in {tag}: {', '.join(feats)}")
    for fname, (lo, hi) in report.threshold_ranges.items():
        lines.append(f"threshold range of {fname}: [{lo:g}, {hi:g}]")
    if report.flagged_features:
        lines.append(
            "flagged (only in weaker models): " + ", ".join(report.flagged_features)
        )
    (outdir / f"{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_csv(
        outdir / f"{stem}.csv",
        ["tag", "relative", "absolute", "top_features"],
        rows,
    )

    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    tags = [r["tag"] for r in report.rows]
    ax.bar(tags, [r["relative"] for r in report.rows], color="#4878d0")
    ax.set_ylabel("relative fidelity")
    ax.set_title("model comparison")
    fig.tight_layout()
    _save_fig(fig, outdir / f"{stem}.png")


def write_policy_report(report: PolicyReport, outdir: Path, stem: str = "policy") -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_json_dict(), outdir / f"{stem}.json")
    lines = [
        f"episodes:    {report.episodes}",
        f"mean reward: {report.mean_reward:.2f}",
        f"std reward:  {report.std_reward:.2f}",
    ]
    (outdir / f"{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_csv(
        outdir / f"{stem}.csv",
        ["episode", "reward"],
        [[i, r] for i, r in enumerate(report.rewards)],
    )

    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    ax.hist(report.rewards, bins=20, color="#4878d0")
    ax.set_xlabel("episode reward")
    ax.set_ylabel("episodes")
    ax.set_title(f"mean reward {report.mean_reward:.1f}")
    fig.tight_layout()
    _save_fig(fig, outdir / f"{stem}.png")


def write_tree_artifacts(tree: DecisionTree, outdir: Path, stem: str = "tree") -> None:
    """Tree JSON plus the DOT graph and the plain-text rule list."""
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / f"{stem}.json").write_text(tree.to_json(), encoding="utf-8")
    (outdir / f"{stem}.dot").write_text(tree.to_dot(), encoding="utf-8")
    (outdir / f"{stem}.rules.txt").write_text(
        "\n".join(tree.rules()) + "\n", encoding="utf-8"
    )
