"""HAR-X regressions of market risk targets on vol-PC averages with
Newey-West standard errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .errors import CollinearityError, DegeneracyError, ParameterError, SampleSizeError

HAR_WINDOWS = (1, 5, 22)
HORIZON_NAMES = {1: "d", 5: "w", 22: "m"}


def har_regressors(v, windows: Sequence[int] = HAR_WINDOWS) -> np.ndarray:
    """Trailing means of each column of ``v`` over each window, ending at ``t``.

    Columns are grouped by window (all regressors for the first window,
    then the second, ...). Rows whose window is incomplete are missing;
    :func:`harx_fit` drops them.
    """
    windows = tuple(int(w) for w in windows)
    if not windows or windows[0] < 1 or any(b <= a for a, b in zip(windows, windows[1:])):
        raise ParameterError("windows must be strictly increasing positive integers")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v.reshape(-1, 1)
    T, n = v.shape
    if T < windows[-1] + 1:
        raise SampleSizeError(f"HAR regressors need >= {windows[-1] + 1} observations")
    out = np.full((T, n * len(windows)), np.nan)
    for a, w in enumerate(windows):
        for j in range(n):
            out[w - 1:, a * n + j] = sliding_window_view(v[:, j], w).mean(axis=1)
    return out


def newey_west_cov(X: np.ndarray, resid: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-kernel HAC covariance of OLS coefficients; ``lag=0`` is HC0."""
    u = X * resid[:, None]
    S = u.T @ u
    for ell in range(1, lag + 1):
        w = 1.0 - ell / (lag + 1.0)
        G = u[ell:].T @ u[:-ell]
        S += w * (G + G.T)
    bread = np.linalg.inv(X.T @ X)
    cov = bread @ S @ bread
    return 0.5 * (cov + cov.T)


def auto_nw_lag(T: int) -> int:
    return int(math.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))


@dataclass
class HarxFit:
    names: list
    params: np.ndarray
    hac_se: np.ndarray
    tstats: np.ndarray
    pvalues: np.ndarray
    nw_lag: int
    r2: float
    nobs: int
    ols_se: np.ndarray = field(repr=False, default=None)
    cov: np.ndarray = field(repr=False, default=None)
    n_regressors: int = 1

    @property
    def beta0(self) -> float:
        return float(self.params[0])

    def _block(self, a: int) -> np.ndarray:
        k = self.n_regressors
        return self.params[1 + a * k: 1 + (a + 1) * k]

    @property
    def beta_d(self) -> np.ndarray:
        return self._block(0)

    @property
    def beta_w(self) -> np.ndarray:
        return self._block(1)

    @property
    def beta_m(self) -> np.ndarray:
        return self._block(2)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "coefficient": self.names,
                "estimate": self.params,
                "se": self.hac_se,
                "tstat": self.tstats,
                "p": self.pvalues,
            }
        )


def harx_fit(y, v, nw_lag="auto", windows: Sequence[int] = HAR_WINDOWS,
             regressor_names: Sequence[str] | None = None) -> HarxFit:
    """OLS of ``y_t`` on ``[1, HAR averages of v through t-1]`` with HAC errors.

    The averages entering row ``t`` end at ``t - 1``, one day before the
    target is observed. ``nw_lag="auto"`` uses ``floor(4 (T/100)^(2/9))``.
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v.reshape(-1, 1)
    k = v.shape[1]
    R = har_regressors(v, windows)
    lagged = np.full_like(R, np.nan)
    lagged[1:] = R[:-1]
    X = np.column_stack([np.ones(y.shape[0]), lagged])
    ok = np.isfinite(y) & np.all(np.isfinite(X), axis=1)
    X = X[ok]
    yy = y[ok]
    T = yy.shape[0]
    if T < 50:
        raise SampleSizeError(f"HAR-X needs >= 50 joint observations, got {T}")
    if np.ptp(yy) == 0:
        raise DegeneracyError("HAR-X target is constant")
    beta, _, rank, sv = np.linalg.lstsq(X, yy, rcond=None)
    if rank < X.shape[1] or sv[-1] <= 1e-10 * sv[0]:
        raise CollinearityError("HAR-X regressors are collinear")
    resid = yy - X @ beta
    L = auto_nw_lag(T) if nw_lag == "auto" else int(nw_lag)
    if L < 0:
        raise ParameterError("nw_lag must be >= 0")
    cov = newey_west_cov(X, resid, L)
    se = np.sqrt(np.diag(cov))
    t = beta / se
    s2 = float(resid @ resid) / (T - X.shape[1])
    ols_se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    dev = yy - yy.mean()
    r2 = 1.0 - float(resid @ resid) / float(dev @ dev)
    base = list(regressor_names) if regressor_names is not None else [f"v{j}" for j in range(k)]
    names = ["const"] + [f"{HORIZON_NAMES.get(w, f'w{w}')}_{b}" for w in windows for b in base]
    return HarxFit(
        names=names,
        params=beta,
        hac_se=se,
        tstats=t,
        pvalues=2.0 * stats.norm.sf(np.abs(t)),
        nw_lag=L,
        r2=r2,
        nobs=T,
        ols_se=ols_se,
        cov=cov,
        n_regressors=k,
    )
