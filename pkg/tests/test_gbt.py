import numpy as np
import pytest

from lvspill.errors import DomainError, ProtocolError, ShapeError
from lvspill.ml.gbt import GbtParams, gbt_train


def _step(n, rng):
    X = rng.uniform(-1, 1, size=(n, 3))
    y = np.where(X[:, 1] > 0.2, 2.0, -1.0)
    return X, y


def test_learns_step_function(rng):
    X, y = _step(400, rng)
    Xv, yv = _step(200, rng)
    m = gbt_train(X, y, Xv, yv, params=GbtParams(learning_rate=1.0, n_rounds=50, reg_lambda=0.0))
    assert np.mean((m.predict(X) - y) ** 2) < 1e-6
    assert abs(m.trees[0].threshold[0] - 0.2) < 0.02
    assert m.trees[0].feature[0] == 1


def test_noise_floor(rng):
    X, y = _step(600, rng)
    y = y + rng.normal(scale=0.5, size=600)
    Xv, yv = _step(300, rng)
    yv = yv + rng.normal(scale=0.5, size=300)
    m = gbt_train(X, y, Xv, yv, params=GbtParams(learning_rate=0.1, n_rounds=500))
    mse = np.mean((m.predict(Xv) - yv) ** 2)
    assert 0.2 < mse < 0.35


def test_deterministic(rng):
    X, y = _step(200, rng)
    Xv, yv = _step(100, rng)
    a = gbt_train(X, y, Xv, yv, params=GbtParams(n_rounds=30))
    b = gbt_train(X, y, Xv, yv, params=GbtParams(n_rounds=30, seed=99))
    np.testing.assert_array_equal(a.predict(Xv), b.predict(Xv))


def test_early_stopping_invariant(rng):
    X = rng.normal(size=(200, 2))
    y = rng.normal(size=200)
    Xv = rng.normal(size=(100, 2))
    yv = rng.normal(size=100)
    p = GbtParams(n_rounds=500, early_stopping_rounds=10, max_depth=4, learning_rate=0.3)
    m = gbt_train(X, y, Xv, yv, params=p)
    losses = np.asarray(m.valid_loss)
    assert m.best_iteration == int(np.argmin(losses))
    assert len(losses) - 1 - m.best_iteration <= p.early_stopping_rounds
    assert len(m.trees) == m.best_iteration


def test_depth_bound(rng):
    X, y = _step(300, rng)
    y = y + X[:, 0] * X[:, 2]
    m = gbt_train(X, y, X, y, params=GbtParams(max_depth=2, n_rounds=20))
    assert all(t.depth <= 2 for t in m.trees)


def test_logistic(rng):
    X = rng.normal(size=(500, 2))
    y = (X[:, 0] > 0).astype(float)
    m = gbt_train(X[:400], y[:400], X[400:], y[400:], objective="logistic",
                  params=GbtParams(learning_rate=0.3, n_rounds=100))
    p = m.predict(X[400:])
    assert np.all((p > 0) & (p < 1))
    assert np.mean((p > 0.5) == y[400:]) > 0.95


def test_missing_values_routed(rng):
    X, y = _step(300, rng)
    X[::7, 1] = np.nan
    m = gbt_train(X, y, X, y, params=GbtParams(n_rounds=20))
    assert np.all(np.isfinite(m.predict(X)))


def test_errors(rng):
    X = rng.normal(size=(20, 2))
    y = rng.normal(size=20)
    with pytest.raises(ProtocolError):
        gbt_train(X, y, X[:0], y[:0])
    with pytest.raises(ShapeError):
        gbt_train(X, y, X[:, :1], y)
    with pytest.raises(DomainError):
        gbt_train(X, y, X, y, objective="logistic")
    with pytest.raises(DomainError):
        gbt_train(X, np.r_[y[:-1], np.nan], X, y)
    with pytest.raises(ValueError):
        gbt_train(X, y, X, y, objective="poisson")
    m = gbt_train(X, y, X, y, params=GbtParams(n_rounds=2))
    with pytest.raises(ShapeError):
        m.predict(X[:, :1])
