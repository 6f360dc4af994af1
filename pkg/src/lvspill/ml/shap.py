"""Exact TreeSHAP attributions for :class:`~lvspill.ml.gbt.GbtModel`.

Attributions are in raw-score (margin) units and satisfy local accuracy:
``base_value + phi.sum(axis=1) == model.predict_margin(X)``.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import ShapeError
from .gbt import GbtModel, Tree


def tree_shap_single(tree: Tree, X, backend=None) -> np.ndarray:
    """TreeSHAP values of one tree (unscaled)."""
    k = _kernels.get_backend(backend)
    X = np.ascontiguousarray(X, dtype=np.float64)
    phi = np.zeros(X.shape)
    k.tree_shap(tree.left, tree.right, tree.feature, tree.threshold, tree.default_left,
                tree.value, tree.cover, max(tree.depth, 1), X, phi, 1.0)
    return phi


def tree_shap(model: GbtModel, X, backend=None) -> tuple[np.ndarray, float]:
    """Per-sample, per-feature attributions and the base value."""
    k = _kernels.get_backend(backend)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got shape {X.shape}")
    phi = np.zeros(X.shape)
    base = model.base_score
    for tree in model.trees[: model.best_iteration]:
        base += model.learning_rate * tree.expected_value()
        if tree.n_nodes == 1:
            continue
        k.tree_shap(tree.left, tree.right, tree.feature, tree.threshold, tree.default_left,
                    tree.value, tree.cover, tree.depth, X, phi, model.learning_rate)
    return phi, float(base)
