"""Command-line surface: batch pipeline from CSV to trees, reports, figures.

Every subcommand is deterministic given its flags and input files, takes
``--seed`` where randomness is involved, and writes machine-readable JSON
next to any human-readable output. Exit codes: 0 success, 2 bad arguments,
3 missing input file, 4 dimension mismatch, 5 empty conditioning region,
6 oracle failure, 7 malformed data, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import ExitStack
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import cartpole
from .analysis import (
    FidelityReport,
    compare_models,
    dependence_report,
    fidelity,
    occurrence_report,
)
from .core import DecisionTree
from .errors import (
    DataError,
    DegenerateConditioning,
    DimensionMismatch,
    DomainError,
    OracleError,
    TreeMirrorError,
    ZeroMassRegion,
)
from .extraction import ExtractionConfig, extract_tree, fit_cart, fit_forest
from .gmm import DiagonalGMM, EMConfig, fit_em, fit_em_bic
from .ingestion import SchemaManifest, load_csv, split_csv
from .oracles import WireOracle, load_model
from .report import (
    write_comparison_report,
    write_dependence_report,
    write_fidelity_report,
    write_json,
    write_occurrence_report,
    write_policy_report,
    write_tree_artifacts,
)
from .synthetic import make_preset


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _load_config(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    with _require_file(path).open("rb") as fh:
        doc = tomllib.load(fh)
    return doc.get(section, doc) if isinstance(doc, dict) else {}


def _manifest_near(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _load_dataset(args):
    """Read the CSV named by --data/--test honoring an optional hints file."""
    kind_hints = None
    response = getattr(args, "response", None)
    if getattr(args, "schema", None):
        doc = json.loads(_require_file(args.schema).read_text(encoding="utf-8"))
        kind_hints = doc.get("kinds")
        response = response or doc.get("response")
    if not response:
        raise DomainError("a response column is required (--response or the schema file)")
    path = getattr(args, "data", None) or args.test
    return load_csv(_require_file(path), response, kind_hints=kind_hints)


def _add_data_flags(parser: argparse.ArgumentParser, name: str = "--data") -> None:
    parser.add_argument(name, required=True)
    parser.add_argument("--response", help="response column (or set it in --schema)")
    parser.add_argument("--schema", help="JSON hints file: {kinds: {col: kind}, response: name}")


# ---------------------------------------------------------------------------
# oracle sources
# ---------------------------------------------------------------------------


def _add_oracle_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="tree or forest JSON model file")
    group.add_argument("--oracle-cmd", help="command serving the line protocol")
    group.add_argument(
        "--builtin",
        choices=["cartpole-expert"],
        help="built-in oracle (the hand-coded cart-pole policy)",
    )


def _open_oracle(args, stack: ExitStack, expected_dimension: int | None = None):
    if args.model:
        oracle = load_model(_require_file(args.model))
        if expected_dimension is not None and oracle.dimension != expected_dimension:
            raise DimensionMismatch(
                f"model has d={oracle.dimension}, expected d={expected_dimension}"
            )
        return oracle
    if args.oracle_cmd:
        wire = WireOracle.open(args.oracle_cmd, expected_dimension=expected_dimension)
        stack.callback(wire.close)
        return wire
    return cartpole.policy_oracle(cartpole.expert_policy)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth_data(args) -> int:
    data = make_preset(args.preset, rows=args.rows, seed=args.seed)
    data.to_csv(Path(args.out))
    print(f"wrote {args.out} ({args.rows} rows, preset {args.preset})")
    return 0


def _cmd_split_data(args) -> int:
    kind_hints = None
    response = args.response
    if args.schema:
        doc = json.loads(_require_file(args.schema).read_text(encoding="utf-8"))
        kind_hints = doc.get("kinds")
        response = response or doc.get("response")
    if not response:
        raise DomainError("a response column is required (--response or the schema file)")
    train_rows, test_rows, header = split_csv(
        _require_file(args.data), response, args.test_fraction, seed=args.seed,
        kind_hints=kind_hints,
    )
    for rows, out in ((train_rows, args.train_out), (test_rows, args.test_out)):
        with Path(out).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    print(f"wrote {args.train_out} ({len(train_rows)} rows) and {args.test_out} ({len(test_rows)} rows)")
    return 0


def _cmd_fit_gmm(args) -> int:
    cfg_file = _load_config(args.config, "fit-gmm")
    dataset, manifest = _load_dataset(args)
    em = EMConfig(
        seed=int(cfg_file.get("seed", args.seed)),
        restarts=args.restarts,
        max_iter=args.max_iter,
    )
    k = cfg_file.get("k", args.k)
    kmax = int(cfg_file.get("kmax", args.kmax))
    use_bic = bool(cfg_file.get("bic", k is None))
    if use_bic:
        model = fit_em_bic(dataset.X, k_max=kmax, cfg=em, feature_names=manifest.feature_names)
    else:
        model = fit_em(dataset.X, int(k), cfg=em, feature_names=manifest.feature_names)
    out = Path(args.out)
    model.save(out)
    (_manifest_near(out)).write_text(manifest.to_json(), encoding="utf-8")
    print(f"wrote {out} (K={model.n_components}, BIC={model.bic:.1f})")
    return 0


def _cmd_train_forest(args) -> int:
    dataset, manifest = _load_dataset(args)
    forest = fit_forest(
        dataset.X,
        dataset.y,
        n_trees=args.trees,
        seed=args.seed,
        task=dataset.task,
        bootstrap=not args.no_bootstrap,
        feature_fraction=None if args.all_features else "sqrt",
        binary_features=manifest.feature_space.binary_features(),
        feature_names=manifest.feature_names,
    )
    out = Path(args.out)
    write_json(forest.to_json_dict(), out)
    (_manifest_near(out)).write_text(manifest.to_json(), encoding="utf-8")
    print(f"wrote {out} ({args.trees} trees)")
    return 0


def _cmd_train_cart(args) -> int:
    dataset, manifest = _load_dataset(args)
    tree = fit_cart(
        dataset.X,
        dataset.y,
        node_budget=args.k,
        task=dataset.task,
        binary_features=manifest.feature_space.binary_features(),
        feature_names=manifest.feature_names,
    )
    out = Path(args.out)
    out.write_text(tree.to_json(), encoding="utf-8")
    (_manifest_near(out)).write_text(manifest.to_json(), encoding="utf-8")
    print(f"wrote {out} ({tree.node_count} nodes)")
    return 0


def _extraction_config(args, task: str, binary: tuple[int, ...]) -> ExtractionConfig:
    cfg_file = _load_config(args.config, "extract")
    return ExtractionConfig(
        node_budget=int(cfg_file.get("k", args.k)),
        samples_per_node=int(cfg_file.get("n", args.n)),
        seed=int(cfg_file.get("seed", args.seed)),
        task=str(cfg_file.get("task", task)),
        min_gain=float(cfg_file.get("min_gain", args.min_gain)),
        max_depth=int(cfg_file.get("max_depth", args.max_depth)),
        binary_features=binary,
    )


def _binary_from_manifest(args, names: tuple[str, ...] | None) -> tuple[int, ...]:
    if not args.manifest:
        return ()
    manifest = SchemaManifest.load(_require_file(args.manifest))
    if names is not None and tuple(manifest.feature_names) != tuple(names):
        raise DimensionMismatch("manifest feature names do not match the mixture's")
    return manifest.feature_space.binary_features()


def _cmd_extract(args) -> int:
    g = DiagonalGMM.load(_require_file(args.gmm))
    with ExitStack() as stack:
        oracle = _open_oracle(args, stack, expected_dimension=g.dimension)
        cfg = _extraction_config(args, oracle.task, _binary_from_manifest(args, g.feature_names))
        if cfg.task != oracle.task:
            raise DomainError(
                f"configured task {cfg.task!r} conflicts with oracle task {oracle.task!r}"
            )
        if args.probe_determinism:
            probe = np.asarray(
                [g.means[j % g.n_components] for j in range(4)], dtype=np.float64
            )
            oracle_probe = getattr(oracle, "verify_determinism", None)
            if oracle_probe is not None:
                oracle_probe(probe)
        tree = extract_tree(oracle, g, cfg)
    out = Path(args.out)
    out.write_text(tree.to_json(), encoding="utf-8")
    if args.report_dir:
        write_tree_artifacts(tree, Path(args.report_dir), out.stem)
    print(f"wrote {out} ({tree.node_count} nodes)")
    return 0


def _cmd_baseline(args) -> int:
    dataset, manifest = _load_dataset(args)
    with ExitStack() as stack:
        oracle = _open_oracle(args, stack, expected_dimension=dataset.X.shape[1])
        labels = oracle.predict(dataset.X)
        tree = fit_cart(
            dataset.X,
            labels,
            node_budget=args.k,
            task=oracle.task,
            binary_features=manifest.feature_space.binary_features(),
            feature_names=manifest.feature_names,
        )
    out = Path(args.out)
    out.write_text(tree.to_json(), encoding="utf-8")
    print(f"wrote {out} ({tree.node_count} nodes)")
    return 0


def _cmd_evaluate(args) -> int:
    tree = DecisionTree.from_json(_require_file(args.tree).read_text(encoding="utf-8"))
    dataset, _ = _load_dataset(args)
    if dataset.X.shape[1] != tree.dimension:
        raise DimensionMismatch(
            f"test data has d={dataset.X.shape[1]}, tree expects d={tree.dimension}"
        )
    with ExitStack() as stack:
        oracle = _open_oracle(args, stack, expected_dimension=tree.dimension)
        report = fidelity(
            tree, oracle, dataset.X, y_true=dataset.y if args.truth else None
        )
    outdir = Path(args.report_dir)
    write_fidelity_report(report, outdir, stem=args.stem)
    print(
        f"relative {report.relative_metric}: {report.relative:.4f}"
        + (f", absolute {report.absolute_metric}: {report.absolute:.4f}" if report.absolute is not None else "")
    )
    return 0


def _cmd_analyze_dependence(args) -> int:
    g = DiagonalGMM.load(_require_file(args.gmm))
    tree = DecisionTree.from_json(_require_file(args.tree).read_text(encoding="utf-8"))
    dataset, _ = _load_dataset(args)
    feature_names = tree.feature_names
    if args.feature not in feature_names:
        raise DomainError(f"unknown feature {args.feature!r}")
    feature = feature_names.index(args.feature)
    with ExitStack() as stack:
        oracle = _open_oracle(args, stack, expected_dimension=tree.dimension)
        report = dependence_report(
            oracle,
            g,
            tree,
            feature,
            dataset.X,
            n=args.n,
            seed=args.seed,
            effect_class=args.effect_class,
        )
    write_dependence_report(report, Path(args.report_dir), stem=args.stem)
    print(
        f"effect of {args.feature}: {report.overall.delta:.4f} "
        f"(se {report.overall.se:.4f}), {len(report.entries)} branching node(s)"
    )
    return 0


def _cmd_analyze_occurrence(args) -> int:
    trees = [
        DecisionTree.from_json(_require_file(p).read_text(encoding="utf-8"))
        for p in args.trees
    ]
    names = trees[0].feature_names
    if args.feature not in names:
        raise DomainError(f"unknown feature {args.feature!r}")
    report = occurrence_report(trees, names.index(args.feature))
    write_occurrence_report(report, Path(args.report_dir), stem=args.stem)
    print(
        f"{args.feature}: occurs in {report.n_occurring}/{report.n_trees} trees, "
        f"{report.n_at_root} at the root"
    )
    return 0


def _cmd_analyze_compare(args) -> int:
    entries = []
    for spec in args.entry:
        try:
            tag, tree_path, report_path = spec.split(":")
        except ValueError:
            raise DomainError(
                f"--entry must look like tag:tree.json:evaluate.json, got {spec!r}"
            ) from None
        tree = DecisionTree.from_json(
            _require_file(tree_path).read_text(encoding="utf-8")
        )
        doc = json.loads(_require_file(report_path).read_text(encoding="utf-8"))
        report = FidelityReport(
            task=doc["task"],
            n_test=doc["n_test"],
            relative=doc["relative"],
            relative_metric=doc["relative_metric"],
            absolute=doc.get("absolute"),
            absolute_metric=doc.get("absolute_metric"),
        )
        entries.append((tag, tree, report))
    comparison = compare_models(entries)
    write_comparison_report(comparison, Path(args.report_dir), stem=args.stem)
    print(
        f"compared {len(entries)} models; shared top features: "
        f"{', '.join(comparison.shared_features) or '(none)'}"
    )
    return 0


def _cmd_policy_eval(args) -> int:
    cfg = (
        cartpole.CartPoleConfig.load(_require_file(args.env_config))
        if args.env_config
        else cartpole.CartPoleConfig()
    )
    if args.expert:
        policy = cartpole.expert_policy
        label = "expert"
    else:
        tree = DecisionTree.from_json(
            _require_file(args.tree).read_text(encoding="utf-8")
        )
        policy = cartpole.tree_policy(tree)
        label = Path(args.tree).stem
    report = cartpole.evaluate_policy(policy, episodes=args.episodes, seed=args.seed, cfg=cfg)
    write_policy_report(report, Path(args.report_dir), stem=args.stem)
    print(f"{label}: mean reward {report.mean_reward:.1f} over {report.episodes} episodes")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treemirror",
        description="Mirror blackbox predictors with small decision trees and audit them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="write a seeded synthetic CSV")
    p.add_argument("--preset", required=True, choices=["wine", "grades", "leak", "cartpole-states"])
    p.add_argument("--rows", type=int, default=178)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth_data)

    p = sub.add_parser("split-data", help="seeded train/test split of a CSV")
    _add_data_flags(p)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.set_defaults(fn=_cmd_split_data)

    p = sub.add_parser("fit-gmm", help="fit the input mixture to a CSV")
    _add_data_flags(p)
    p.add_argument("--k", type=int, default=None, help="fixed component count")
    p.add_argument("--kmax", type=int, default=10, help="BIC search upper bound")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="TOML config; overrides flags")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_fit_gmm)

    p = sub.add_parser("train-forest", help="train the bagged-forest target model")
    _add_data_flags(p)
    p.add_argument("--trees", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--all-features", action="store_true", help="disable feature subsampling")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train_forest)

    p = sub.add_parser("train-cart", help="train a budgeted CART on true labels")
    _add_data_flags(p)
    p.add_argument("--k", type=int, default=31)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train_cart)

    p = sub.add_parser("extract", help="distill an oracle into a small tree")
    p.add_argument("--gmm", required=True)
    _add_oracle_flags(p)
    p.add_argument("--k", type=int, default=31)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-gain", type=float, default=1e-7)
    p.add_argument("--max-depth", type=int, default=64)
    p.add_argument("--manifest", help="schema manifest (marks indicator features)")
    p.add_argument("--config", help="TOML config; overrides flags")
    p.add_argument("--probe-determinism", action="store_true")
    p.add_argument("--report-dir", help="also write DOT and rule artifacts here")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("baseline", help="CART on oracle-labelled training points")
    _add_data_flags(p)
    _add_oracle_flags(p)
    p.add_argument("--k", type=int, default=31)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("evaluate", help="fidelity of a tree against an oracle")
    p.add_argument("--tree", required=True)
    _add_oracle_flags(p)
    _add_data_flags(p, "--test")
    p.add_argument("--truth", action="store_true", help="also score against true labels")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--stem", default="evaluate")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("analyze", help="dependence, occurrence and comparison reports")
    asub = p.add_subparsers(dest="analysis", required=True)

    q = asub.add_parser("dependence", help="feature effect and per-node subgroups")
    q.add_argument("--gmm", required=True)
    q.add_argument("--tree", required=True)
    _add_oracle_flags(q)
    q.add_argument("--feature", required=True)
    _add_data_flags(q, "--test")
    q.add_argument("--n", type=int, default=10_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--effect-class", type=int, default=None)
    q.add_argument("--report-dir", required=True)
    q.add_argument("--stem", default="dependence")
    q.set_defaults(fn=_cmd_analyze_dependence)

    q = asub.add_parser("occurrence", help="where a feature occurs across trees")
    q.add_argument("--feature", required=True)
    q.add_argument("--trees", nargs="+", required=True)
    q.add_argument("--report-dir", required=True)
    q.add_argument("--stem", default="occurrence")
    q.set_defaults(fn=_cmd_analyze_occurrence)

    q = asub.add_parser("compare", help="compare models via their mirror trees")
    q.add_argument(
        "--entry",
        action="append",
        required=True,
        help="tag:tree.json:evaluate.json (repeat at least twice)",
    )
    q.add_argument("--report-dir", required=True)
    q.add_argument("--stem", default="comparison")
    q.set_defaults(fn=_cmd_analyze_compare)

    p = sub.add_parser("policy-eval", help="reward of a tree used as a policy")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--tree")
    group.add_argument("--expert", action="store_true")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env-config", help="JSON file overriding the physics constants")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--stem", default="policy")
    p.set_defaults(fn=_cmd_policy_eval)

    return parser


EXIT_CODES: list[tuple[type, int]] = [
    (DimensionMismatch, 4),
    (ZeroMassRegion, 5),
    (DegenerateConditioning, 5),
    (OracleError, 6),
    (DataError, 7),
    (DomainError, 2),
    (FileNotFoundError, 3),
]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except TreeMirrorError as exc:
        for klass, code in EXIT_CODES:
            if isinstance(exc, klass):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
