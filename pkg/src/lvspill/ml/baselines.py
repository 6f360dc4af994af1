"""Baseline models evaluated under the same splits and labels as the booster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..errors import CollinearityError
from ..harx import har_regressors
from .metrics import EvalReport, choose_threshold, classification_metrics, regression_metrics


def ols_fit(X, y) -> np.ndarray:
    A = np.column_stack([np.ones(X.shape[0]), X])
    beta, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise CollinearityError("baseline regressors are collinear")
    return beta


def ols_predict(beta, X) -> np.ndarray:
    return beta[0] + X @ beta[1:]


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float
    mean: np.ndarray
    scale: np.ndarray

    def _prep(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return np.where(np.isfinite(Z), Z, 0.0)

    def predict(self, X) -> np.ndarray:
        return expit(self._prep(X) @ self.coef + self.intercept)


def logistic_fit(X, y, l2: float = 1.0) -> LogisticModel:
    """L2-penalised logistic regression on train-standardised features.

    Missing feature values are imputed with the training mean (zero after
    standardisation). The intercept is not penalised.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mean = np.nanmean(X, axis=0)
    scale = np.nanstd(X, axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = np.where(np.isfinite(X), (X - mean) / scale, 0.0)
    n, k = Z.shape

    def fun(w):
        m = Z @ w[1:] + w[0]
        loss = np.sum(np.logaddexp(0.0, m) - y * m) / n + 0.5 * l2 * (w[1:] @ w[1:]) / n
        r = expit(m) - y
        grad = np.r_[r.sum(), Z.T @ r + l2 * w[1:]] / n
        return loss, grad

    res = minimize(fun, np.zeros(k + 1), jac=True, method="L-BFGS-B", options={"maxiter": 1000})
    return LogisticModel(res.x[1:], float(res.x[0]), mean, scale)


def baselines(X, y, labels, rows: dict, ar_column: int, har_columns=None) -> dict:
    """AR(H) persistence, HAR-X and logistic baselines.

    ``X`` holds the lagged features used by the booster; ``ar_column`` is
    the column carrying the lagged risk index, ``har_columns`` the columns
    averaged for HAR-X (default: the AR column only). ``rows`` maps split
    names to row indices, and the logistic threshold is chosen on
    ``rows["valid"]`` only.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    out = {}
    tr = rows["train"]

    ar = X[:, [ar_column]]
    ok = np.isfinite(ar[:, 0])
    tr_ok = tr[ok[tr]]
    beta = ols_fit(ar[tr_ok], y[tr_ok])
    pred = ols_predict(beta, ar)
    rep = EvalReport()
    for name, r in rows.items():
        r = r[ok[r]]
        rep.regression[name] = regression_metrics(y[r], pred[r])
    out["ar_persistence"] = rep

    cols = [ar_column] if har_columns is None else list(har_columns)
    H = har_regressors(X[:, cols])
    ok = np.all(np.isfinite(H), axis=1)
    tr_ok = tr[ok[tr]]
    beta = ols_fit(H[tr_ok], y[tr_ok])
    pred = ols_predict(beta, np.where(np.isfinite(H), H, 0.0))
    rep = EvalReport()
    for name, r in rows.items():
        r = r[ok[r]]
        rep.regression[name] = regression_metrics(y[r], pred[r])
    out["harx"] = rep

    logit = logistic_fit(X[tr], labels[tr])
    scores = logit.predict(X)
    choice = choose_threshold(scores[rows["valid"]], labels[rows["valid"]])
    rep = EvalReport(tau=choice.tau, threshold=choice)
    for name, r in rows.items():
        rep.classification[name] = classification_metrics(labels[r], scores[r], choice.tau)
    out["logistic"] = rep
    return out
