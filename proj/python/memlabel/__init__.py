"""Prototype selection, expert labeling and weak-label aggregation."""

from ._memlabel import (
    BudgetInfeasible,
    ConfigError,
    LabelModel,
    MemlabelError,
    ParseError,
    ProviderRefusal,
    ValidationError,
    __version__,
    compute_cost,
    distance_matrix,
    dtw_distance,
    euclidean_distance,
    fit_label_model,
    generate_memories,
    majority_vote,
    plan_seeds,
    run,
    score,
    symmetric_kl_distance,
)

ABSTAIN = -1

__all__ = [
    "ABSTAIN",
    "BudgetInfeasible",
    "ConfigError",
    "LabelModel",
    "MemlabelError",
    "ParseError",
    "ProviderRefusal",
    "ValidationError",
    "__version__",
    "compute_cost",
    "distance_matrix",
    "dtw_distance",
    "euclidean_distance",
    "fit_label_model",
    "generate_memories",
    "majority_vote",
    "plan_seeds",
    "run",
    "score",
    "symmetric_kl_distance",
]
