"""Principal-component factor groups, crowding targets and the forward risk index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegeneracyError, ParameterError, SampleSizeError, ShapeError
from .features import rolling_standardize

PCA_GROUPS = ("returns", "amihud", "turnover", "garch_vol", "park_vol")
# feature suffix feeding each PCA group
GROUP_FIELDS = {
    "returns": "ret",
    "amihud": "amihud",
    "turnover": "turnover",
    "garch_vol": "garch_vol",
    "park_vol": "park_vol",
}


@dataclass
class PcaModel:
    """Correlation-matrix PCA.

    ``explained_ratio`` covers the retained components; ``all_explained_ratio``
    covers every component and sums to one.
    """

    columns: list[str]
    means: np.ndarray
    stds: np.ndarray
    loadings: np.ndarray
    explained_ratio: np.ndarray
    all_explained_ratio: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    @property
    def cumulative_explained(self) -> float:
        return float(self.explained_ratio.sum())


def pca_fit(x, columns: Sequence[str] | None = None, k: int | None = None,
            cum_variance: float | None = None) -> PcaModel:
    """Fit PCA on the listwise-complete rows of ``x``.

    Exactly one of ``k`` (number of components) or ``cum_variance`` (keep the
    smallest k reaching that cumulative share) must be given. Each loading
    column is signed so that its largest-magnitude entry is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("pca_fit expects a 2-D matrix")
    p = x.shape[1]
    columns = list(columns) if columns is not None else [f"x{i}" for i in range(p)]
    if (k is None) == (cum_variance is None):
        raise ParameterError("give exactly one of k or cum_variance")
    if k is not None and not 1 <= k <= p:
        raise ParameterError(f"k must be in [1, {p}]")
    if cum_variance is not None and not 0 < cum_variance <= 1:
        raise ParameterError("cum_variance must be in (0, 1]")
    rows = x[np.all(np.isfinite(x), axis=1)]
    need = k if k is not None else 2
    if rows.shape[0] < max(need, 2):
        raise SampleSizeError(f"pca_fit needs >= {max(need, 2)} complete rows, got {rows.shape[0]}")
    means = rows.mean(axis=0)
    stds = rows.std(axis=0, ddof=1)
    for j in range(p):
        if not stds[j] > 1e-12 * abs(means[j]):
            raise DegeneracyError(f"pca_fit: column {columns[j]!r} is constant")
    z = (rows - means) / stds
    corr = z.T @ z / (rows.shape[0] - 1)
    corr = 0.5 * (corr + corr.T)
    eigval, eigvec = np.linalg.eigh(corr)
    order = np.argsort(eigval)[::-1]
    eigval = np.clip(eigval[order], 0.0, None)
    eigvec = eigvec[:, order]
    ratio = eigval / eigval.sum()
    if k is None:
        cum = np.cumsum(ratio)
        k = int(np.searchsorted(cum, cum_variance - 1e-12) + 1)
        k = min(k, p)
    load = eigvec[:, :k].copy()
    for c in range(k):
        j = int(np.argmax(np.abs(load[:, c])))
        if load[j, c] < 0:
            load[:, c] = -load[:, c]
    return PcaModel(columns, means, stds, load, ratio[:k].copy(), ratio)


def pca_transform(model: PcaModel, x) -> np.ndarray:
    """Scores ``standardized(x) @ loadings``; rows with missing input are missing."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(model.means):
        raise ShapeError(f"expected {len(model.means)} columns, got shape {x.shape}")
    return ((x - model.means) / model.stds) @ model.loadings


@dataclass(frozen=True)
class CrowdingSpec:
    """Crowding target settings; ``leave_out`` holds 1-based PC indices."""

    K: int
    standardization: str = "full_sample"
    window: int | None = None
    leave_out: frozenset = frozenset()

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError("K must be >= 1")
        if self.standardization not in ("full_sample", "rolling"):
            raise ParameterError(f"unknown standardization {self.standardization!r}")
        if self.standardization == "rolling" and (self.window is None or self.window < 2):
            raise ParameterError("rolling standardization needs a window >= 2")
        if not set(self.leave_out) <= set(range(1, self.K + 1)):
            raise ParameterError("leave_out must be a subset of 1..K")

    @classmethod
    def leave_k_out(cls, K: int, k: int, **kw) -> "CrowdingSpec":
        """Exclude the ``k`` largest-variance components (PC1..PCk)."""
        return cls(K=K, leave_out=frozenset(range(1, k + 1)), **kw)


def crowding_target(scores, spec: CrowdingSpec) -> np.ndarray:
    """Root mean square of standardized vol-PC scores across retained PCs."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
    if s.shape[1] != spec.K:
        raise ShapeError(f"expected {spec.K} score columns, got {s.shape[1]}")
    keep = [k for k in range(spec.K) if (k + 1) not in spec.leave_out]
    if not keep:
        raise ParameterError("all PCs excluded from the crowding target")
    z = np.empty((s.shape[0], len(keep)))
    for c, k in enumerate(keep):
        col = s[:, k]
        if spec.standardization == "rolling":
            z[:, c] = rolling_standardize(col, spec.window)
        else:
            ok = np.isfinite(col)
            mu = col[ok].mean()
            sd = col[ok].std(ddof=1)
            if not sd > 0:
                raise DegeneracyError(f"PC{k + 1} scores have zero variance")
            z[:, c] = (col - mu) / sd
    return np.sqrt(np.mean(z * z, axis=1))


def trailing_sum_of_squares(r, window: int) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    out = np.full(r.shape, np.nan)
    if r.shape[0] >= window:
        out[window - 1:] = (sliding_window_view(r, window) ** 2).sum(axis=1)
    return out


def legacy_rv_targets(market_return, window: int = 252, rv_days: int = 14) -> dict:
    """14-day realized volatility and its rolling-standardized variant."""
    rv = np.sqrt(trailing_sum_of_squares(market_return, rv_days))
    return {"market_rv14": rv, "market_rv14_rs": rolling_standardize(rv, window)}


@dataclass(frozen=True)
class RiskIndexSpec:
    H: int = 10
    feat_window: int = 5
    shock_window: int = 5

    def __post_init__(self):
        if self.H < 1:
            raise ParameterError("H must be >= 1")
        if self.feat_window < 2 or self.shock_window < 2:
            raise ParameterError("risk index windows must be >= 2")


def _trailing(x, window: int, fn) -> np.ndarray:
    out = np.full(x.shape, np.nan)
    if x.shape[0] >= window:
        out[window - 1:] = fn(sliding_window_view(x, window), axis=1)
    return out


def feature_dispersion(features, window: int) -> np.ndarray:
    """Trailing sample std of the cross-feature mean."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f.reshape(-1, 1)
    m = f.mean(axis=1)
    return _trailing(m, window, lambda w, axis: w.std(axis=axis, ddof=1))


def shock_intensity(shocks, window: int) -> np.ndarray:
    """Trailing mean of the cross-equation mean absolute structural shock."""
    u = np.asarray(shocks, dtype=np.float64)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    a = np.abs(u).mean(axis=1)
    return _trailing(a, window, np.mean)


def risk_index_from_components(dispersion, intensity, H: int) -> np.ndarray:
    """``(1/H) * sum_{h=1..H} (dispersion + intensity)_{t-h+1}``."""
    c = np.asarray(dispersion, dtype=np.float64) + np.asarray(intensity, dtype=np.float64)
    return _trailing(c, H, np.mean) if H > 1 else c.copy()


def forward_target(index, H: int) -> np.ndarray:
    """Value at ``t + H`` stored at row ``t`` (missing for the last H rows)."""
    x = np.asarray(index, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    if x.shape[0] > H:
        out[: x.shape[0] - H] = x[H:]
    return out


def risk_index(features, structural_shocks, spec: RiskIndexSpec) -> dict:
    """Risk index series and its ``H``-day-ahead forecasting target.

    ``structural_shocks`` must already be aligned to the feature rows
    (missing where the VAR produced no residual).
    """
    f = np.asarray(features, dtype=np.float64)
    u = np.asarray(structural_shocks, dtype=np.float64)
    if f.shape[0] != u.shape[0]:
        raise ShapeError("shocks must be aligned to feature dates")
    disp = feature_dispersion(f, spec.feat_window)
    inten = shock_intensity(u, spec.shock_window)
    idx = risk_index_from_components(disp, inten, spec.H)
    return {
        "dispersion": disp,
        "intensity": inten,
        "index": idx,
        "target": forward_target(idx, spec.H),
    }


def nearest_rank(values, q: float) -> float:
    """Smallest order statistic with cumulative fraction >= q."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(q * v.shape[0] - 1e-9))
    return float(v[rank - 1])
