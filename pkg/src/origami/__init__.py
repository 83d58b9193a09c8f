"""Decision-focused abstraction of finite outcome spaces by folding the probability simplex."""

from origami.simplex import (
    Fold,
    LossMatrix,
    SetExtension,
    argmin_action,
    as_loss,
    as_prob,
    fold_loss,
    fold_prob,
    h_entropy,
    sample_simplex,
    subopt_gap,
)
from origami.objectives import (
    IntegralObjective,
    MaxIncreaseObjective,
    ObjectiveMatrix,
    VertexObjective,
    ccp_max_increase,
    find_best_fold,
    integral_objective,
    integral_objective_matrix,
    vertex_objective,
    vertex_objective_matrix,
)
from origami.folding import (
    FoldTree,
    Partition,
    StopRule,
    cumulative_gap,
    hierarchical_origami,
    project_dataset,
    run_origami,
)

__version__ = "0.1.0"

__all__ = [
    "Fold",
    "FoldTree",
    "IntegralObjective",
    "LossMatrix",
    "MaxIncreaseObjective",
    "ObjectiveMatrix",
    "Partition",
    "SetExtension",
    "StopRule",
    "VertexObjective",
    "argmin_action",
    "as_loss",
    "as_prob",
    "ccp_max_increase",
    "cumulative_gap",
    "find_best_fold",
    "fold_loss",
    "fold_prob",
    "h_entropy",
    "hierarchical_origami",
    "integral_objective",
    "integral_objective_matrix",
    "project_dataset",
    "run_origami",
    "sample_simplex",
    "subopt_gap",
    "vertex_objective",
    "vertex_objective_matrix",
]
