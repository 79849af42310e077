"""Statistical core of fusetree.

This package contains:
- Records (Schema, StopRule, SimConfig, RunConfig)
- Data (Dataset, ingestion, candidate splits, design matrices)
- GLM engine (IRLS fits, tests, information criteria, cross-validation)
- Smooth terms (cubic regression splines with GCV)
- Tree-structured clustering (split paths, stop rules, partitions)
- Bootstrap and simulation study
"""

from fusetree.model.bootstrap import (
    AlignedEffects,
    BootstrapResult,
    SimilarityMatrix,
    align_effects,
    confidence_intervals,
    run_bootstrap,
    similarity_and_stability,
    variable_relevance,
)
from fusetree.model.data import (
    CategoryOrder,
    Dataset,
    DesignContext,
    DesignMatrix,
    SplitSet,
    Variable,
    VariableKind,
    build_design,
    candidate_splits,
    ingest_dataset,
    nominal_ordering,
    write_dataset,
)
from fusetree.model.glm import (
    Binomial,
    Family,
    Gaussian,
    GlmFit,
    Penalty,
    TestResult,
    fit_glm,
    get_family,
    information_criterion,
    kfold_indices,
    lr_test,
    predict_response,
    predictive_deviance,
    repeated_cv_deviance,
    wald_test,
)
from fusetree.model.models import STUDY_RULES, ColumnSpec, RunConfig, Schema, SimConfig, StopRule
from fusetree.model.simulation import SimMetrics, SimTruth, StudyReport, evaluate_fit, generate_dataset, run_study
from fusetree.model.smooth import (
    SmoothTermFit,
    SplineBasis,
    build_spline_basis,
    fit_smooth,
    gcv_score,
    select_smoothing,
    smooth_grid,
)
from fusetree.model.tree import (
    ClusterSet,
    FitSpec,
    Split,
    SplitTrace,
    TraceStep,
    TreeStructuredModel,
    apply_stop_rule,
    build_model,
    coefficient_paths,
    extract_partitions,
    fit_path,
    fit_tree_model,
    forward_step,
)

__all__ = [
    # Records
    "ColumnSpec",
    "RunConfig",
    "Schema",
    "SimConfig",
    "StopRule",
    "STUDY_RULES",
    # GLM engine
    "Binomial",
    "Family",
    "Gaussian",
    "GlmFit",
    "Penalty",
    "TestResult",
    "fit_glm",
    "get_family",
    "information_criterion",
    "kfold_indices",
    "lr_test",
    "predict_response",
    "predictive_deviance",
    "repeated_cv_deviance",
    "wald_test",
    # Smooth terms
    "SmoothTermFit",
    "SplineBasis",
    "build_spline_basis",
    "fit_smooth",
    "gcv_score",
    "select_smoothing",
    "smooth_grid",
    # Data
    "CategoryOrder",
    "Dataset",
    "DesignContext",
    "DesignMatrix",
    "SplitSet",
    "Variable",
    "VariableKind",
    "build_design",
    "candidate_splits",
    "ingest_dataset",
    "nominal_ordering",
    "write_dataset",
    # Tree-structured clustering
    "ClusterSet",
    "FitSpec",
    "Split",
    "SplitTrace",
    "TraceStep",
    "TreeStructuredModel",
    "apply_stop_rule",
    "build_model",
    "coefficient_paths",
    "extract_partitions",
    "fit_path",
    "fit_tree_model",
    "forward_step",
    # Bootstrap
    "AlignedEffects",
    "BootstrapResult",
    "SimilarityMatrix",
    "align_effects",
    "confidence_intervals",
    "run_bootstrap",
    "similarity_and_stability",
    "variable_relevance",
    # Simulation
    "SimMetrics",
    "SimTruth",
    "StudyReport",
    "evaluate_fit",
    "generate_dataset",
    "run_study",
]
