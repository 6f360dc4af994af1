"""Second-order gradient boosted regression trees with early stopping.

Trees are grown depth-first with exact greedy splits (see
``lvspill._kernels.best_split``). A row goes left when ``x < threshold``;
missing values follow the child that received more training hessian.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .. import _kernels
from ..errors import DomainError, ProtocolError, ShapeError

logger = logging.getLogger(__name__)

OBJECTIVES = ("squared_error", "logistic")


@dataclass(frozen=True)
class GbtParams:
    max_depth: int = 3
    learning_rate: float = 0.05
    n_rounds: int = 2000
    early_stopping_rounds: int = 50
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    seed: int = 0


@dataclass
class Tree:
    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.left.shape[0]

    @property
    def depth(self) -> int:
        def walk(i):
            if self.left[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def expected_value(self) -> float:
        leaves = self.left < 0
        return float(np.sum(self.value[leaves] * self.cover[leaves]) / self.cover[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            internal = self.left[node] >= 0
            if not internal.any():
                return node
            idx = np.nonzero(internal)[0]
            nd = node[idx]
            xv = X[idx, self.feature[nd]]
            go_left = np.where(np.isnan(xv), self.default_left[nd] == 1, xv < self.threshold[nd])
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass
class GbtModel:
    """Boosted ensemble; the raw score is ``base_score + lr * sum(trees[:best_iteration])``."""

    objective: str
    trees: list
    learning_rate: float
    best_iteration: int
    base_score: float
    n_features: int
    feature_names: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list, repr=False)
    params: GbtParams = field(default_factory=GbtParams)

    def _check(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict_margin(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees[: self.best_iteration]:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict(self, X) -> np.ndarray:
        m = self.predict_margin(X)
        return expit(m) if self.objective == "logistic" else m


def _grad_hess(objective, margin, y):
    if objective == "squared_error":
        return margin - y, np.ones_like(y)
    p = expit(margin)
    return p - y, np.maximum(p * (1.0 - p), 1e-16)


def _loss(objective, margin, y) -> float:
    if objective == "squared_error":
        d = margin - y
        return float(np.mean(d * d))
    # log loss written in terms of the margin for stability
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def _build_tree(X, sorted_idx, n_valid, g, h, params: GbtParams) -> Tree:
    n = X.shape[0]
    left, right, feature, threshold, default_left, value, cover = [], [], [], [], [], [], []

    def grow(mask: np.ndarray, depth: int) -> int:
        node = len(left)
        G = float(g[mask].sum())
        H = float(h[mask].sum())
        for lst, v in ((left, -1), (right, -1), (feature, -1), (threshold, 0.0),
                       (default_left, 1), (value, -G / (H + params.reg_lambda)), (cover, H)):
            lst.append(v)
        if depth >= params.max_depth:
            return node
        gain, feat, thr, dleft = _kernels.best_split(
            X, sorted_idx, n_valid, mask.view(np.uint8), g, h, G, H,
            params.reg_lambda, params.min_child_weight,
        )
        if feat < 0 or 0.5 * gain <= params.gamma:
            return node
        xv = X[:, feat]
        go_left = np.where(np.isnan(xv), dleft, xv < thr)
        feature[node] = feat
        threshold[node] = thr
        default_left[node] = 1 if dleft else 0
        left[node] = grow(mask & go_left, depth + 1)
        right[node] = grow(mask & ~go_left, depth + 1)
        return node

    grow(np.ones(n, dtype=bool), 0)
    return Tree(
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        default_left=np.asarray(default_left, dtype=np.uint8),
        value=np.asarray(value, dtype=np.float64),
        cover=np.asarray(cover, dtype=np.float64),
    )


def gbt_train(X_train, y_train, X_valid, y_valid, objective: str = "squared_error",
              params: GbtParams = GbtParams(), feature_names=None) -> GbtModel:
    """Boost until validation loss has not improved for
    ``params.early_stopping_rounds`` rounds; keep ``best_iteration`` trees.

    ``best_iteration`` counts trees, so ``0`` means the base score alone was
    best on validation. Training is deterministic; ``params.seed`` is
    recorded but no randomness is used.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    X = np.ascontiguousarray(X_train, dtype=np.float64)
    Xv = np.ascontiguousarray(X_valid, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.float64)
    yv = np.asarray(y_valid, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ShapeError("need at least one feature")
    if Xv.shape[0] == 0:
        raise ProtocolError("validation set is empty")
    if Xv.shape[1] != X.shape[1]:
        raise ShapeError("train and validation feature counts differ")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yv))):
        raise DomainError("targets must be finite")
    if objective == "logistic":
        if not np.all(np.isin(y, (0.0, 1.0))) or not np.all(np.isin(yv, (0.0, 1.0))):
            raise DomainError("logistic targets must be 0/1")
        p = min(max(float(y.mean()), 1e-6), 1 - 1e-6)
        base = math.log(p / (1.0 - p))
    else:
        base = float(y.mean())

    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)
    n_valid = np.isfinite(X).sum(axis=0).astype(np.int64)
    margin = np.full(X.shape[0], base)
    margin_v = np.full(Xv.shape[0], base)
    losses = [_loss(objective, margin_v, yv)]
    best_loss, best_it = losses[0], 0
    trees = []
    for it in range(1, params.n_rounds + 1):
        g, h = _grad_hess(objective, margin, y)
        tree = _build_tree(X, sorted_idx, n_valid, g, h, params)
        trees.append(tree)
        margin += params.learning_rate * tree.predict(X)
        margin_v += params.learning_rate * tree.predict(Xv)
        loss = _loss(objective, margin_v, yv)
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_it = loss, it
        elif it - best_it >= params.early_stopping_rounds:
            break
    logger.info("gbt %s: %d rounds, best_iteration=%d, valid loss %.6g",
                objective, len(trees), best_it, best_loss)
    return GbtModel(
        objective=objective,
        trees=trees[:best_it],
        learning_rate=params.learning_rate,
        best_iteration=best_it,
        base_score=base,
        n_features=X.shape[1],
        feature_names=list(feature_names) if feature_names is not None else [],
        valid_loss=losses,
        params=params,
    )
