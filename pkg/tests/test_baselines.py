import numpy as np

from lvspill.ml.baselines import baselines, logistic_fit
from lvspill.ml.metrics import roc_auc
from lvspill.ml.split import chrono_split


def test_random_walk_persistence(rng):
    n = 4000
    w = np.cumsum(rng.normal(size=n))
    X = np.full((n, 1), np.nan)
    X[1:, 0] = w[:-1]
    y = w
    labels = (y > np.quantile(y[:2800], 0.85)).astype(float)
    split = chrono_split(n)
    rows = {k: split.rows(k) for k in ("train", "valid", "test")}
    # make sure valid has both classes
    labels[rows["valid"][:3]] = 1
    labels[rows["valid"][3:6]] = 0
    out = baselines(X, y, labels, rows, ar_column=0)
    assert out["ar_persistence"].regression["test"]["r2"] > 0.9
    assert set(out) == {"ar_persistence", "harx", "logistic"}
    assert np.isfinite(out["logistic"].tau)


def test_logistic_separable(rng):
    X = rng.normal(size=(300, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    m = logistic_fit(X, y, l2=1e-3)
    assert roc_auc(y, m.predict(X)) == 1.0


def test_logistic_imputes_missing(rng):
    X = rng.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(float)
    m = logistic_fit(X, y)
    p = m.predict(np.array([[np.nan, np.nan]]))
    assert p[0] == m.predict(m.mean.reshape(1, -1))[0]
