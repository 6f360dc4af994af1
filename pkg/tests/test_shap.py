import numpy as np
import pytest

from lvspill import _kernels
from lvspill.ml.gbt import GbtParams, Tree, gbt_train
from lvspill.ml.shap import tree_shap, tree_shap_single

from oracles import shapley_bruteforce

BACKENDS = sorted(_kernels.BACKENDS)


def _tree(left, right, feature, threshold, value, cover, default_left=None):
    n = len(left)
    return Tree(np.asarray(left, np.int64), np.asarray(right, np.int64), np.asarray(feature, np.int64),
                np.asarray(threshold, float),
                np.asarray(default_left if default_left is not None else [1] * n, np.uint8),
                np.asarray(value, float), np.asarray(cover, float))


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_leaf(backend):
    t = _tree([-1], [-1], [-1], [0.0], [3.0], [10.0])
    phi = tree_shap_single(t, np.zeros((2, 2)), backend=backend)
    np.testing.assert_array_equal(phi, 0.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_stump_closed_form(backend):
    # x0 < 0.5 -> 1.0 (cover 3), else 5.0 (cover 1); E = 2
    t = _tree([1, -1, -1], [2, -1, -1], [0, -1, -1], [0.5, 0, 0], [0, 1.0, 5.0], [4, 3, 1])
    phi = tree_shap_single(t, np.array([[0.0, 9.0], [1.0, 9.0]]), backend=backend)
    np.testing.assert_allclose(phi, [[-1.0, 0.0], [3.0, 0.0]], atol=1e-14)


def _random_model(rng, depth, n_feat, objective="squared_error", nan_frac=0.0):
    X = rng.normal(size=(300, n_feat))
    y = X[:, 0] * X[:, 1 % n_feat] + np.sin(X[:, -1]) + 0.1 * rng.normal(size=300)
    if objective == "logistic":
        y = (y > np.median(y)).astype(float)
    if nan_frac:
        X[rng.uniform(size=X.shape) < nan_frac] = np.nan
    m = gbt_train(X, y, X, y, objective=objective,
                  params=GbtParams(max_depth=depth, n_rounds=8, learning_rate=0.5, early_stopping_rounds=100))
    return m, X


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("depth,n_feat", [(1, 2), (2, 4), (3, 5), (3, 8)])
def test_exhaustive_oracle(rng, backend, depth, n_feat):
    m, X = _random_model(rng, depth, n_feat, nan_frac=0.05)
    for tree in m.trees:
        phi = tree_shap_single(tree, X[:5], backend=backend)
        for r in range(5):
            ref = shapley_bruteforce(tree, X[r], n_feat)
            np.testing.assert_allclose(phi[r], ref, atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("objective", ["squared_error", "logistic"])
def test_local_accuracy(rng, backend, objective):
    m, X = _random_model(rng, 3, 4, objective)
    phi, base = tree_shap(m, X, backend=backend)
    np.testing.assert_allclose(base + phi.sum(axis=1), m.predict_margin(X), atol=1e-10)


def test_unused_feature_zero(rng):
    X = rng.normal(size=(200, 3))
    y = X[:, 0] ** 2
    m = gbt_train(X, y, X, y, params=GbtParams(n_rounds=10, learning_rate=0.5))
    used = {int(f) for t in m.trees for f in t.feature if f >= 0}
    phi, _ = tree_shap(m, X)
    for j in set(range(3)) - used:
        assert np.all(phi[:, j] == 0)
