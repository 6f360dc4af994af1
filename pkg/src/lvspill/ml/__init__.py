"""Leakage-safe forecasting protocol: splits, boosting, thresholds, metrics, SHAP."""

from .baselines import baselines, logistic_fit
from .gbt import GbtModel, GbtParams, Tree, gbt_train
from .metrics import (
    EvalReport,
    ThresholdChoice,
    choose_threshold,
    evaluate,
    pr_auc,
    pr_curve,
    roc_auc,
    roc_curve,
)
from .shap import tree_shap
from .split import SplitSpec, chrono_split, label_top_quantile

__all__ = [
    "EvalReport",
    "GbtModel",
    "GbtParams",
    "SplitSpec",
    "ThresholdChoice",
    "Tree",
    "baselines",
    "choose_threshold",
    "chrono_split",
    "evaluate",
    "gbt_train",
    "label_top_quantile",
    "logistic_fit",
    "pr_auc",
    "pr_curve",
    "roc_auc",
    "roc_curve",
    "tree_shap",
]
