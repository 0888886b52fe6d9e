from .backend import available_kernels, backend_name, kernel
from .builder import (ForestModel, ForestParams, RegressionTree, SplitDecision,
                      best_split, feature_importance, fit_forest, fit_tree,
                      predict)

__all__ = [
    "ForestModel", "ForestParams", "RegressionTree", "SplitDecision",
    "available_kernels", "backend_name", "best_split", "feature_importance",
    "fit_forest", "fit_tree", "kernel", "predict",
]
