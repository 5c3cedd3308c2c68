"""Merging moment constraints from overlapping datasets with maximum
entropy, and reading causal structure and effect bounds off the fit."""

from .core import (
    Assignment,
    Constraint,
    ConstraintSet,
    FeatureSpec,
    SampleTable,
    TabularDistribution,
    Variable,
    VariableSet,
    bivariate_basis,
    empirical_moments,
    enumerate_states,
    evaluate_feature,
    marginalize,
    pairwise_basis,
    univariate_basis,
)
from .solver import (
    MaxEntProblem,
    MaxEntSolution,
    NotConvergedError,
    OptimizerConfig,
    dual_gradient,
    dual_objective,
    fit,
    log_partition,
)
from .causal import (
    CandidateGraph,
    EdgeDecision,
    build_candidate_graph,
    check_faithful_expectations,
    decide_edge_known_order,
    edge_report,
    max_relative_difference,
    moral_graph,
    relative_difference,
)
from .effects import (
    AceBounds,
    InterventionalQuery,
    ace,
    ace_bounds,
    do_distribution,
    interventional_bounds,
)

__all__ = [
    "Assignment", "Constraint", "ConstraintSet", "FeatureSpec", "SampleTable",
    "TabularDistribution", "Variable", "VariableSet", "bivariate_basis",
    "empirical_moments", "enumerate_states", "evaluate_feature", "marginalize",
    "pairwise_basis", "univariate_basis",
    "MaxEntProblem", "MaxEntSolution", "NotConvergedError", "OptimizerConfig",
    "dual_gradient", "dual_objective", "fit", "log_partition",
    "CandidateGraph", "EdgeDecision", "build_candidate_graph",
    "check_faithful_expectations", "decide_edge_known_order", "edge_report",
    "max_relative_difference", "moral_graph", "relative_difference",
    "AceBounds", "InterventionalQuery", "ace", "ace_bounds",
    "do_distribution", "interventional_bounds",
]
