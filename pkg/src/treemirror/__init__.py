"""Mirror blackbox predictors with small, auditable decision trees."""

from .analysis import (
    DependenceReport,
    EffectEstimate,
    FidelityReport,
    ModelComparison,
    OccurrenceReport,
    SubgroupEffect,
    compare_models,
    dependence_report,
    feature_effect,
    fidelity,
    macro_f1,
    occurrence_report,
    subgroup_effect,
)
from .core import (
    BoxConstraint,
    DecisionTree,
    FeatureSpace,
    Leaf,
    Split,
    simplify_constraint,
    single_leaf_tree,
)
from .extraction import (
    ExtractionConfig,
    Forest,
    LabeledSample,
    SplitCandidate,
    best_split,
    extract_tree,
    fit_cart,
    fit_forest,
    impurity,
    node_sample,
)
from .gmm import (
    ConditionalWeights,
    DiagonalGMM,
    EMConfig,
    conditional_weights,
    fit_em,
    fit_em_bic,
    sample_conditional,
    sample_truncated_normal,
    truncated_normal,
)
from .ingestion import Dataset, SchemaManifest, load_csv, split_csv, split_dataset
from .oracles import FunctionOracle, Oracle, WireOracle, handshake, load_model

__version__ = "0.1.0"

__all__ = [
    "BoxConstraint",
    "ConditionalWeights",
    "Dataset",
    "DecisionTree",
    "DependenceReport",
    "DiagonalGMM",
    "EMConfig",
    "EffectEstimate",
    "ExtractionConfig",
    "FeatureSpace",
    "FidelityReport",
    "Forest",
    "FunctionOracle",
    "LabeledSample",
    "Leaf",
    "ModelComparison",
    "OccurrenceReport",
    "Oracle",
    "SchemaManifest",
    "Split",
    "SplitCandidate",
    "SubgroupEffect",
    "WireOracle",
    "best_split",
    "compare_models",
    "conditional_weights",
    "dependence_report",
    "extract_tree",
    "feature_effect",
    "fidelity",
    "fit_cart",
    "fit_em",
    "fit_em_bic",
    "fit_forest",
    "handshake",
    "impurity",
    "load_csv",
    "load_model",
    "macro_f1",
    "node_sample",
    "occurrence_report",
    "sample_conditional",
    "sample_truncated_normal",
    "simplify_constraint",
    "single_leaf_tree",
    "split_csv",
    "split_dataset",
    "subgroup_effect",
    "truncated_normal",
]
