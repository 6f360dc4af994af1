"""Per-asset liquidity and volatility proxies.

All functions take and return 1-D float arrays aligned to a shared date
index, with ``NaN`` for missing values. Trailing-window operations only use
observations dated at or before ``t``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import minimize
from scipy.special import expit, logit

from . import _kernels
from .errors import (
    CollinearityError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    EmptyInputError,
    ParameterError,
    SampleSizeError,
)
from .panel import ColumnMeta, Panel

logger = logging.getLogger(__name__)

FOUR_LN2 = 4.0 * math.log(2.0)
MAX_PERSISTENCE = 0.999
# (alpha, beta) starting points for the multi-start likelihood search
GARCH_STARTS = ((0.05, 0.90), (0.10, 0.80), (0.20, 0.60))
GARCH_MIN_OBS = 250
GARCH_MAX_ITER = 4000


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _where(dates, i) -> str:
    return f" at {dates[i]}" if dates is not None else f" at row {i}"


def log_returns(price, dates=None) -> np.ndarray:
    """``ln(P_t / P_{t-1})``; the first value and any gap neighbour are missing."""
    p = _arr(price)
    bad = np.nonzero(p <= 0)[0]
    if bad.size:
        raise DomainError(f"non-positive price {p[bad[0]]}{_where(dates, bad[0])}")
    out = np.full(p.shape, np.nan)
    out[1:] = np.log(p[1:] / p[:-1])
    return out


def amihud(returns, dollar_volume, dates=None) -> np.ndarray:
    """``|r_t| / DV_t``, missing where the dollar volume is zero or missing."""
    r = _arr(returns)
    dv = _arr(dollar_volume)
    bad = np.nonzero(dv < 0)[0]
    if bad.size:
        raise DomainError(f"negative volume {dv[bad[0]]}{_where(dates, bad[0])}")
    out = np.full(r.shape, np.nan)
    ok = dv > 0
    out[ok] = np.abs(r[ok]) / dv[ok]
    return out


def trailing_mean(s, window: int, min_periods: int | None = None) -> np.ndarray:
    return (
        pd.Series(_arr(s))
        .rolling(window, min_periods=window if min_periods is None else min_periods)
        .mean()
        .to_numpy()
    )


def turnover(volume, market_cap=None, fallback_window: int = 252) -> np.ndarray:
    """Dollar volume over market cap; without caps, volume over its trailing mean.

    The fallback ratio uses the ``fallback_window``-day trailing mean
    including day ``t`` and is missing until the window is full.
    """
    v = _arr(volume)
    if not np.any(np.isfinite(v)):
        raise EmptyInputError("turnover: volume is entirely missing")
    if np.any(v < 0):
        raise DomainError("turnover: negative volume")
    cap = None if market_cap is None else _arr(market_cap)
    if cap is not None and np.any(np.isfinite(cap)):
        if np.any(cap < 0):
            raise DomainError("turnover: negative market cap")
        out = np.full(v.shape, np.nan)
        ok = cap > 0
        out[ok] = v[ok] / cap[ok]
        return out
    logger.info("turnover: no market cap, using volume / trailing %d-day mean", fallback_window)
    mean = trailing_mean(v, fallback_window)
    out = np.full(v.shape, np.nan)
    ok = mean > 0
    out[ok] = v[ok] / mean[ok]
    return out


def parkinson_vol(high, low, dates=None) -> np.ndarray:
    """Daily range-based volatility ``sqrt(ln(H/L)^2 / (4 ln 2))``."""
    hi = _arr(high)
    lo = _arr(low)
    bad = np.nonzero((hi <= 0) | (lo <= 0))[0]
    if bad.size:
        raise DomainError(f"non-positive high/low{_where(dates, bad[0])}")
    bad = np.nonzero(hi < lo)[0]
    if bad.size:
        raise DomainError(f"high below low{_where(dates, bad[0])}")
    return np.abs(np.log(hi / lo)) / math.sqrt(FOUR_LN2)


@dataclass
class GarchFit:
    """Gaussian GARCH(1,1) fit on demeaned returns.

    ``cond_var`` covers the observed (non-missing) returns only; ``observed``
    maps it back onto the input index.
    """

    omega: float
    alpha: float
    beta: float
    cond_var: np.ndarray
    loglik: float
    mean: float = 0.0
    observed: np.ndarray = field(default=None, repr=False)

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    def volatility(self) -> np.ndarray:
        """Conditional sigma on the full input index (missing where input was)."""
        out = np.full(self.observed.shape, np.nan)
        out[self.observed] = np.sqrt(self.cond_var)
        return out


def _unpack(theta):
    log_omega, a, b = theta
    persistence = MAX_PERSISTENCE * expit(a)
    share = expit(b)
    return math.exp(log_omega), persistence * share, persistence * (1.0 - share)


def _pack(omega, alpha, beta):
    persistence = alpha + beta
    return np.array([math.log(omega), logit(persistence / MAX_PERSISTENCE), logit(alpha / persistence)])


def garch11_fit(returns, max_iter: int = GARCH_MAX_ITER) -> GarchFit:
    """Fit ``s2_t = omega + alpha e_{t-1}^2 + beta s2_{t-1}`` by Gaussian MLE.

    Returns are demeaned and scaled to unit sample variance before the
    search, which runs Nelder-Mead from the three ``GARCH_STARTS`` on an
    unconstrained reparametrisation (log omega, logit persistence, logit
    share of alpha). Persistence is capped at 0.999. ``s2_1`` is the sample
    variance. ``omega`` and ``cond_var`` are reported on the original scale.
    """
    r = _arr(returns)
    observed = np.isfinite(r)
    x = r[observed]
    if x.shape[0] < GARCH_MIN_OBS:
        raise SampleSizeError(f"GARCH needs >= {GARCH_MIN_OBS} returns, got {x.shape[0]}")
    mu = float(x.mean())
    eps = x - mu
    var = float(eps.var(ddof=1))
    if not var > 1e-300 or np.all(eps == 0):
        raise DegeneracyError("GARCH: returns have zero variance")
    scale = math.sqrt(var)
    e = np.ascontiguousarray(eps / scale)

    def objective(theta):
        omega, alpha, beta = _unpack(theta)
        val = _kernels.garch11_nll(e, omega, alpha, beta, 1.0)
        return val if math.isfinite(val) else 1e300

    best = None
    last = None
    for alpha0, beta0 in GARCH_STARTS:
        res = minimize(
            objective,
            _pack(1.0 - alpha0 - beta0, alpha0, beta0),
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-10},
        )
        last = res
        if not res.success or not math.isfinite(res.fun):
            logger.debug("GARCH start (%.2f, %.2f) did not converge: %s", alpha0, beta0, res.message)
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise ConvergenceError(
            f"GARCH(1,1) did not converge from any start within {max_iter} iterations",
            last_iterate=_unpack(last.x),
        )
    omega, alpha, beta = _unpack(best.x)
    s2 = np.asarray(_kernels.garch11_filter(e, omega, alpha, beta, 1.0)) * var
    loglik = -best.fun - eps.shape[0] * math.log(scale)
    return GarchFit(
        omega=omega * var,
        alpha=alpha,
        beta=beta,
        cond_var=s2,
        loglik=float(loglik),
        mean=mu,
        observed=observed,
    )


def simulate_garch11(n: int, omega: float, alpha: float, beta: float, rng, burn: int = 500) -> np.ndarray:
    """Simulate GARCH(1,1) innovations with Gaussian shocks."""
    z = rng.standard_normal(n + burn)
    out = np.empty(n + burn)
    s2 = omega / (1.0 - alpha - beta)
    prev = 0.0
    for t in range(n + burn):
        s2 = omega + alpha * prev * prev + beta * s2 if t else s2
        prev = math.sqrt(s2) * z[t]
        out[t] = prev
    return out[burn:]


@dataclass
class ResidualizedSeries:
    values: np.ndarray
    slope: float
    intercept: float
    source: str = ""


def residualize(y, x, source: str = "") -> ResidualizedSeries:
    """OLS residuals of ``y`` on ``[1, x]`` over jointly observed rows."""
    y = _arr(y)
    x = _arr(x)
    ok = np.isfinite(y) & np.isfinite(x)
    n = int(ok.sum())
    if n < 3:
        raise SampleSizeError(f"residualize needs >= 3 joint observations, got {n}")
    xo = x[ok]
    yo = y[ok]
    xc = xo - xo.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-24 * max(1.0, float(xo @ xo)):
        raise CollinearityError("residualize: regressor is constant")
    slope = float(xc @ (yo - yo.mean())) / sxx
    intercept = float(yo.mean() - slope * xo.mean())
    out = np.full(y.shape, np.nan)
    out[ok] = yo - intercept - slope * xo
    return ResidualizedSeries(out, slope, intercept, source)


def rolling_standardize(s, window: int) -> np.ndarray:
    """Trailing z-score over ``window`` rows using the sample (n-1) std.

    The first ``window - 1`` rows, windows with a missing value and windows
    with zero spread are missing.
    """
    if int(window) != window or window < 2:
        raise ParameterError("rolling window must be an integer >= 2")
    window = int(window)
    s = _arr(s)
    out = np.full(s.shape, np.nan)
    if s.shape[0] < window:
        return out
    win = sliding_window_view(s, window)
    mean = win.mean(axis=1)
    std = win.std(axis=1, ddof=1)
    ok = np.isfinite(std) & (std > 1e-12 * np.abs(mean))
    z = np.full(mean.shape, np.nan)
    z[ok] = (s[window - 1:][ok] - mean[ok]) / std[ok]
    out[window - 1:] = z
    return out


FEATURE_FIELDS = (
    ("ret", "return"),
    ("amihud", "liquidity"),
    ("turnover", "turnover"),
    ("garch_vol", "vol_proxy"),
    ("park_vol", "vol_proxy"),
    ("resid_garch_vol", "resid_vol"),
    ("resid_park_vol", "resid_vol"),
    ("resid_turnover", "turnover"),
)


def asset_features(panel: Panel, asset: str, fallback_window: int = 252) -> tuple[Panel, dict]:
    """Engineer the proxy set for one asset of a raw price panel.

    Returns the feature panel and a dict of fit diagnostics (GARCH
    parameters, residualisation slopes).
    """
    n = len(panel)
    dates = panel.dates
    close = panel.column(f"{asset}_close")
    ret = log_returns(close, dates)
    info: dict = {"asset": asset}

    vol_name = f"{asset}_volume"
    cap_name = f"{asset}_market_cap"
    volume = panel.column(vol_name) if vol_name in panel else np.full(n, np.nan)
    cap = panel.column(cap_name) if cap_name in panel else None
    amh = amihud(ret, volume, dates) if np.any(np.isfinite(volume)) else np.full(n, np.nan)
    try:
        turn = turnover(volume, cap, fallback_window)
    except EmptyInputError:
        logger.warning("%s: no volume data, turnover missing", asset)
        turn = np.full(n, np.nan)

    try:
        fit = garch11_fit(ret)
        garch = fit.volatility()
        info.update(garch_omega=fit.omega, garch_alpha=fit.alpha, garch_beta=fit.beta, garch_loglik=fit.loglik)
    except (SampleSizeError, DegeneracyError, ConvergenceError) as exc:
        logger.warning("%s: GARCH fit failed (%s), garch_vol missing", asset, exc)
        garch = np.full(n, np.nan)

    hi_name, lo_name = f"{asset}_high", f"{asset}_low"
    if hi_name in panel and lo_name in panel:
        park = parkinson_vol(panel.column(hi_name), panel.column(lo_name), dates)
    else:
        logger.warning("%s: no high/low columns, park_vol missing", asset)
        park = np.full(n, np.nan)

    values = {"ret": ret, "amihud": amh, "turnover": turn, "garch_vol": garch, "park_vol": park}
    for src in ("garch_vol", "park_vol", "turnover"):
        try:
            res = residualize(values[src], ret, source=f"{asset}_{src}")
            values[f"resid_{src}"] = res.values
            info[f"resid_{src}_slope"] = res.slope
            info[f"resid_{src}_intercept"] = res.intercept
        except (SampleSizeError, CollinearityError) as exc:
            logger.warning("%s: residualising %s failed (%s)", asset, src, exc)
            values[f"resid_{src}"] = np.full(n, np.nan)

    metas = [ColumnMeta(f"{asset}_{name}", role, asset) for name, role in FEATURE_FIELDS]
    mat = np.column_stack([values[name] for name, _ in FEATURE_FIELDS])
    return Panel(dates, metas, mat), info
