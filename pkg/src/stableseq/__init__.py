"""stableseq: stable model sequences across data-batch retraining iterations."""

from .accel import backend_name
from .datagen import BatchSeries, Dataset, gen_classification, gen_linear, split_batches
from .distances import DistanceMatrix, DistanceSpec, build_matrices, distance_matrix
from .evaluation import LossKind, auc, empirical_loss
from .models import (
    CandidatePool,
    ImportanceModel,
    LinearModel,
    Model,
    TreeModel,
    TreePath,
    extract_paths,
    gini_importance,
    load_pool,
    save_pool,
)
from .selector import (
    InfeasibleError,
    LayeredGraph,
    SequencePlan,
    brute_force_sequence,
    build_graph,
    filter_pool,
    greedy_sequence,
    solve_sequence,
)
from .trainers import FamilyConfig, bootstrap_pool, train_cart, train_logistic, train_ridge

__version__ = "0.1.0"

__all__ = [
    "BatchSeries", "CandidatePool", "Dataset", "DistanceMatrix", "DistanceSpec",
    "FamilyConfig", "ImportanceModel", "InfeasibleError", "LayeredGraph",
    "LinearModel", "LossKind", "Model", "SequencePlan", "TreeModel", "TreePath",
    "auc", "backend_name", "bootstrap_pool", "brute_force_sequence", "build_graph",
    "build_matrices", "distance_matrix", "empirical_loss", "extract_paths",
    "filter_pool", "gen_classification", "gen_linear", "gini_importance",
    "greedy_sequence", "load_pool", "save_pool", "solve_sequence", "split_batches",
    "train_cart", "train_logistic", "train_ridge",
]
