"""Regression/classification metrics, validation-only thresholding and the
evaluation report."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ..errors import ProtocolError, ShapeError

logger = logging.getLogger(__name__)


def r2_score(y_true, y_pred) -> float:
    y = np.asarray(y_true, dtype=np.float64)
    p = np.asarray(y_pred, dtype=np.float64)
    dev = y - y.mean()
    sst = float(dev @ dev)
    if sst == 0:
        return math.nan
    return 1.0 - float((y - p) @ (y - p)) / sst


def mse(y_true, y_pred) -> float:
    d = np.asarray(y_true, dtype=np.float64) - np.asarray(y_pred, dtype=np.float64)
    return float(np.mean(d * d))


def _two_classes(labels) -> bool:
    lab = np.asarray(labels)
    return bool(lab.size) and 0 < lab.sum() < lab.size


def roc_auc(labels, scores) -> float:
    """Mann-Whitney AUC with average ranks for ties; missing for one class."""
    lab = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if not _two_classes(lab):
        logger.warning("ROC-AUC undefined for single-class labels")
        return math.nan
    ranks = rankdata(s)
    n_pos = lab.sum()
    n_neg = lab.size - n_pos
    return float((ranks[lab == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _cumulative_counts(labels, scores):
    lab = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    l_sorted = lab[order]
    # last index of every block of tied scores
    ends = np.r_[np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1]
    tp = np.cumsum(l_sorted)[ends]
    fp = (ends + 1) - tp
    return tp, fp, s_sorted[ends]


def roc_curve(labels, scores):
    """``(fpr, tpr, thresholds)`` starting at ``(0, 0)``."""
    lab = np.asarray(labels, dtype=np.float64)
    tp, fp, thr = _cumulative_counts(lab, scores)
    n_pos = lab.sum()
    n_neg = lab.size - n_pos
    return np.r_[0.0, fp / n_neg], np.r_[0.0, tp / n_pos], np.r_[np.inf, thr]


def pr_curve(labels, scores):
    """``(precision, recall, thresholds)`` from recall 0 (precision 1) to
    recall 1, where precision equals prevalence."""
    lab = np.asarray(labels, dtype=np.float64)
    tp, fp, thr = _cumulative_counts(lab, scores)
    precision = tp / (tp + fp)
    recall = tp / lab.sum()
    return np.r_[1.0, precision], np.r_[0.0, recall], np.r_[np.inf, thr]


def pr_auc(labels, scores) -> float:
    """Area under the step-interpolated PR curve (average precision)."""
    if not _two_classes(labels):
        logger.warning("PR-AUC undefined for single-class labels")
        return math.nan
    precision, recall, _ = pr_curve(labels, scores)
    return float(np.sum(np.diff(recall) * precision[1:]))


def confusion(labels, pred) -> dict:
    lab = np.asarray(labels).astype(bool)
    p = np.asarray(pred).astype(bool)
    return {
        "tp": int(np.sum(lab & p)),
        "fp": int(np.sum(~lab & p)),
        "tn": int(np.sum(~lab & ~p)),
        "fn": int(np.sum(lab & ~p)),
    }


def f1_from_confusion(c: dict) -> float:
    denom = 2 * c["tp"] + c["fp"] + c["fn"]
    return 2 * c["tp"] / denom if denom else 0.0


def f1_score(labels, pred) -> float:
    return f1_from_confusion(confusion(labels, pred))


@dataclass(frozen=True)
class ThresholdChoice:
    tau: float
    valid_f1: float
    candidate_grid: str = "min, midpoints of sorted unique scores, max"


def threshold_grid(scores) -> np.ndarray:
    u = np.unique(np.asarray(scores, dtype=np.float64))
    return np.unique(np.r_[u[0], 0.5 * (u[:-1] + u[1:]), u[-1]])


def choose_threshold(valid_scores, valid_labels) -> ThresholdChoice:
    """Threshold maximising validation F1 for ``score >= tau``; ties go to the
    smaller ``tau``. The result is meant to be frozen for test data."""
    s = np.asarray(valid_scores, dtype=np.float64)
    lab = np.asarray(valid_labels, dtype=np.float64)
    if s.shape != lab.shape:
        raise ShapeError("scores and labels must have the same length")
    if not _two_classes(lab):
        raise ProtocolError("validation labels must contain both classes")
    best_tau, best_f1 = None, -1.0
    for tau in threshold_grid(s):
        f1 = f1_score(lab, s >= tau)
        if f1 > best_f1:
            best_tau, best_f1 = float(tau), f1
    return ThresholdChoice(best_tau, best_f1)


def classification_metrics(labels, scores, tau: float) -> dict:
    lab = np.asarray(labels, dtype=np.float64)
    pred = np.asarray(scores, dtype=np.float64) >= tau
    c = confusion(lab, pred)
    return {
        "roc_auc": roc_auc(lab, scores),
        "pr_auc": pr_auc(lab, scores),
        "f1": f1_from_confusion(c),
        "accuracy": (c["tp"] + c["tn"]) / lab.size if lab.size else math.nan,
        "prevalence": float(lab.mean()) if lab.size else math.nan,
        "confusion": c,
        "n": int(lab.size),
    }


def regression_metrics(y_true, y_pred) -> dict:
    return {"r2": r2_score(y_true, y_pred), "mse": mse(y_true, y_pred), "n": int(len(y_true))}


@dataclass
class EvalReport:
    """Metrics per split; ``tau`` is the frozen validation threshold."""

    regression: dict = field(default_factory=dict)
    classification: dict = field(default_factory=dict)
    tau: float = math.nan
    threshold: ThresholdChoice | None = None
    shap: np.ndarray | None = field(default=None, repr=False)
    shap_base: float = math.nan

    def rows(self, model: str) -> list[dict]:
        out = []
        for split, m in self.regression.items():
            for key in ("r2", "mse"):
                out.append({"model": model, "task": "regression", "split": split, "metric": key, "value": m[key]})
        for split, m in self.classification.items():
            for key in ("roc_auc", "pr_auc", "f1", "accuracy", "prevalence"):
                out.append({"model": model, "task": "classification", "split": split, "metric": key, "value": m[key]})
            for key, v in m["confusion"].items():
                out.append({"model": model, "task": "classification", "split": split, "metric": key, "value": v})
        if math.isfinite(self.tau):
            out.append({"model": model, "task": "classification", "split": "valid", "metric": "tau", "value": self.tau})
        return out


def evaluate(scores, labels, y_true, y_pred, tau: float) -> dict:
    """Regression and classification metrics for one split at a frozen ``tau``."""
    if len(scores) != len(labels) or len(y_true) != len(y_pred):
        raise ShapeError("inconsistent lengths")
    return {
        "regression": regression_metrics(y_true, y_pred),
        "classification": classification_metrics(labels, scores, tau),
    }
