"""Vector autoregressions: estimation, BIC order choice, orthogonalized IRF/FEVD,
Ljung-Box diagnostics and Cholesky structural shocks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular

from .errors import (
    CollinearityError,
    DegeneracyError,
    FactorizationError,
    ParameterError,
    SampleSizeError,
)

logger = logging.getLogger(__name__)


def lag_design(y: np.ndarray, p: int, start: int | None = None):
    """Regressand and ``[1, y_{t-1}, ..., y_{t-p}]`` design for rows ``t >= start``.

    Rows with any missing value are dropped; the kept row indices are
    returned as well.
    """
    T, n = y.shape
    start = p if start is None else start
    rows = np.arange(start, T)
    X = np.empty((rows.shape[0], 1 + n * p))
    X[:, 0] = 1.0
    for i in range(1, p + 1):
        X[:, 1 + (i - 1) * n: 1 + i * n] = y[rows - i]
    Y = y[rows]
    ok = np.all(np.isfinite(X), axis=1) & np.all(np.isfinite(Y), axis=1)
    return Y[ok], X[ok], rows[ok]


def ols(Y: np.ndarray, X: np.ndarray):
    """Least squares with an explicit rank check."""
    beta, _, rank, sv = np.linalg.lstsq(X, Y, rcond=None)
    if rank < X.shape[1] or sv[-1] <= 1e-10 * sv[0]:
        raise CollinearityError(f"design matrix is rank deficient ({rank} < {X.shape[1]})")
    return beta, Y - X @ beta


@dataclass
class VarModel:
    """Reduced-form VAR ``y_t = c + sum_i A_i y_{t-i} + e_t``.

    ``coeffs[i]`` holds ``A_{i+1}``; ``resid_rows`` are the input rows the
    residuals belong to. ``resid_cov`` uses the degrees-of-freedom
    adjusted denominator ``T_eff - (n p + 1)``.
    """

    order: int
    intercept: np.ndarray
    coeffs: np.ndarray
    resid_cov: np.ndarray
    residuals: np.ndarray
    resid_rows: np.ndarray
    names: list = field(default_factory=list)
    bic: dict = field(default_factory=dict)
    design: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.intercept.shape[0]

    @property
    def nobs(self) -> int:
        return self.residuals.shape[0]

    def companion(self) -> np.ndarray:
        n, p = self.n, self.order
        C = np.zeros((n * p, n * p))
        C[:n] = np.hstack(list(self.coeffs))
        if p > 1:
            C[n:, : n * (p - 1)] = np.eye(n * (p - 1))
        return C

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))


def _min_obs(n: int, pmax: int) -> int:
    return n * pmax + pmax + 20


def select_order_bic(y, pmax: int = 10) -> tuple[int, dict]:
    """BIC ``ln|S(p)| + p n^2 ln(T)/T`` on the common sample aligned to ``pmax``."""
    y = np.asarray(y, dtype=np.float64)
    T, n = y.shape
    scores = {}
    # common sample: rows usable with pmax lags, shared by every candidate p
    _, _, rows = lag_design(y, pmax, start=pmax)
    for p in range(1, pmax + 1):
        Y, X = _restrict(y, p, rows)
        Te = Y.shape[0]
        _, E = ols(Y, X)
        S = E.T @ E / Te
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            raise DegeneracyError("residual covariance is singular")
        scores[p] = float(logdet + p * n * n * math.log(Te) / Te)
    best = min(scores, key=lambda p: (scores[p], p))
    return best, scores


def _restrict(y, p, rows):
    n = y.shape[1]
    X = np.empty((rows.shape[0], 1 + n * p))
    X[:, 0] = 1.0
    for i in range(1, p + 1):
        X[:, 1 + (i - 1) * n: 1 + i * n] = y[rows - i]
    return y[rows], X


def var_fit(y, order="bic", pmax: int = 10, names=None) -> VarModel:
    """Per-equation OLS VAR with intercept at a fixed or BIC-selected order."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    T, n = y.shape
    names = list(names) if names is not None else [f"y{i}" for i in range(n)]
    bic = {}
    if order == "bic":
        if pmax < 1:
            raise ParameterError("pmax must be >= 1")
        usable = int(np.all(np.isfinite(y), axis=1).sum())
        if usable < _min_obs(n, pmax):
            raise SampleSizeError(f"VAR needs >= {_min_obs(n, pmax)} rows for pmax={pmax}, got {usable}")
        p, bic = select_order_bic(y, pmax)
    else:
        p = int(order)
        if p < 1:
            raise ParameterError("VAR order must be >= 1")
        usable = int(np.all(np.isfinite(y), axis=1).sum())
        if usable < _min_obs(n, p):
            raise SampleSizeError(f"VAR({p}) needs >= {_min_obs(n, p)} rows, got {usable}")
    Y, X, rows = lag_design(y, p)
    beta, E = ols(Y, X)
    dof = Y.shape[0] - X.shape[1]
    S = E.T @ E / dof
    S = 0.5 * (S + S.T)
    coeffs = np.stack([beta[1 + i * n: 1 + (i + 1) * n].T for i in range(p)])
    return VarModel(
        order=p,
        intercept=beta[0].copy(),
        coeffs=coeffs,
        resid_cov=S,
        residuals=E,
        resid_rows=rows,
        names=names,
        bic=bic,
        design=X,
    )


def cholesky_factor(S: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with ``1e-10 * trace / n`` jitter."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * float(np.trace(S)) / S.shape[0]
        logger.warning("residual covariance not positive definite, adding ridge jitter %.3g", jitter)
        try:
            return np.linalg.cholesky(S + jitter * np.eye(S.shape[0]))
        except np.linalg.LinAlgError:
            raise FactorizationError(
                "residual covariance is not positive definite even after ridge jitter"
            ) from None


def ma_coefficients(m: VarModel, horizons: int) -> np.ndarray:
    """Reduced-form MA matrices ``Phi_0..Phi_H`` from powers of the companion matrix."""
    n = m.n
    C = m.companion()
    out = np.empty((horizons + 1, n, n))
    M = np.eye(C.shape[0])
    for h in range(horizons + 1):
        out[h] = M[:n, :n]
        M = C @ M
    return out


def orth_irf(m: VarModel, horizons: int = 20) -> np.ndarray:
    """Orthogonalized impulse responses ``Phi_h P``; entry ``[h, i, j]`` is the
    response of variable ``i`` to shock ``j`` after ``h`` steps."""
    P = cholesky_factor(m.resid_cov)
    return ma_coefficients(m, horizons) @ P


def fevd(m: VarModel, horizons: int = 20) -> np.ndarray:
    """Forecast error variance shares; ``[h, i, j]`` uses steps ``0..h``."""
    irf = orth_irf(m, horizons - 1)
    cum = np.cumsum(irf ** 2, axis=0)
    return cum / cum.sum(axis=2, keepdims=True)


def ljung_box(resid, lags: int = 10) -> tuple[float, float]:
    """Ljung-Box ``Q`` and its chi-square(lags) p-value."""
    e = np.asarray(resid, dtype=np.float64)
    e = e[np.isfinite(e)]
    T = e.shape[0]
    if T <= lags + 1:
        raise SampleSizeError(f"Ljung-Box needs more than {lags + 1} observations")
    d = e - e.mean()
    denom = float(d @ d)
    if not denom > 0:
        raise DegeneracyError("Ljung-Box: residuals have zero variance")
    q = 0.0
    for k in range(1, lags + 1):
        rho = float(d[k:] @ d[:-k]) / denom
        q += rho * rho / (T - k)
    q *= T * (T + 2)
    return q, float(stats.chi2.sf(q, lags))


def structural_shocks(m: VarModel) -> np.ndarray:
    """Cholesky-orthogonalized shocks ``u_t = P^{-1} e_t`` (rows follow ``resid_rows``)."""
    P = cholesky_factor(m.resid_cov)
    return solve_triangular(P, m.residuals.T, lower=True).T


def simulate_var(coeffs, T: int, rng, cov=None, intercept=None, burn: int = 200) -> np.ndarray:
    """Simulate a Gaussian VAR with coefficient matrices ``coeffs[i] = A_{i+1}``."""
    A = np.asarray(coeffs, dtype=np.float64)
    if A.ndim == 2:
        A = A[None]
    p, n, _ = A.shape
    L = np.linalg.cholesky(np.eye(n) if cov is None else np.asarray(cov))
    c = np.zeros(n) if intercept is None else np.asarray(intercept)
    e = rng.standard_normal((T + burn, n)) @ L.T
    y = np.zeros((T + burn, n))
    for t in range(T + burn):
        acc = c + e[t]
        for i in range(1, p + 1):
            if t - i >= 0:
                acc = acc + A[i - 1] @ y[t - i]
        y[t] = acc
    return y[burn:]
