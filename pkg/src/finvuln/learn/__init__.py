"""Classifier training and evaluation under the out-of-time protocol."""

from .metrics import auroc, confusion_counts, threshold_metrics
from .linear import LogisticModel, fit_logistic, logistic_loss_grad, train_logistic
from .tree import Tree, grow_classification_tree, grow_regression_tree
from .ensemble import (
    GradientBoosting,
    RandomForest,
    feature_importance,
    train_gradient_boosting,
    train_random_forest,
)
from .protocol import (
    DEFAULT_GRIDS,
    Dataset,
    EvalReport,
    Imputer,
    MODEL_KINDS,
    SplitError,
    SplitPlan,
    Standardizer,
    TrainedModel,
    balance_training,
    evaluate,
    load_model,
    run_matrix,
    run_one,
    save_model,
    split_out_of_time,
    train,
)

__all__ = [
    "auroc",
    "confusion_counts",
    "threshold_metrics",
    "LogisticModel",
    "fit_logistic",
    "logistic_loss_grad",
    "train_logistic",
    "Tree",
    "grow_classification_tree",
    "grow_regression_tree",
    "GradientBoosting",
    "RandomForest",
    "feature_importance",
    "train_gradient_boosting",
    "train_random_forest",
    "DEFAULT_GRIDS",
    "Dataset",
    "EvalReport",
    "Imputer",
    "MODEL_KINDS",
    "SplitError",
    "SplitPlan",
    "Standardizer",
    "TrainedModel",
    "balance_training",
    "evaluate",
    "load_model",
    "run_matrix",
    "run_one",
    "save_model",
    "split_out_of_time",
    "train",
]
