"""Granger tests, Benjamini-Hochberg FDR, Granger-network PageRank core
selection and the three-layer test runner."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import (
    CollinearityError,
    DomainError,
    LvspillError,
    ParameterError,
    SampleSizeError,
)
from .panel import Panel
from .varmodel import lag_design, ols, var_fit

logger = logging.getLogger(__name__)


def _unit_scale(a: np.ndarray) -> np.ndarray:
    # proxies live on very different scales (Amihud ~1e-13); the test
    # statistics are scale invariant, the rank check is not
    sd = np.nanstd(a, axis=0)
    return a / np.where(sd > 0, sd, 1.0)


def granger_pair(x, y, lag: int) -> tuple[float, float]:
    """F-test that ``lag`` lags of ``x`` add nothing to an AR(``lag``) of ``y``.

    ``F = ((RSS_r - RSS_u) / lag) / (RSS_u / (T_eff - 2 lag - 1))`` referred to
    ``F(lag, T_eff - 2 lag - 1)``.
    """
    if lag < 1:
        raise ParameterError("lag must be >= 1")
    data = _unit_scale(np.column_stack([np.asarray(y, dtype=np.float64), np.asarray(x, dtype=np.float64)]))
    complete = int(np.all(np.isfinite(data), axis=1).sum())
    if complete < 10 * lag + 10:
        raise SampleSizeError(f"granger_pair needs >= {10 * lag + 10} joint observations, got {complete}")
    Y, X, _ = lag_design(data, lag)
    # design columns: 1, then (y, x) pairs per lag
    y_cols = [0] + [1 + 2 * i for i in range(lag)]
    _, e_u = ols(Y[:, :1], X)
    _, e_r = ols(Y[:, :1], X[:, y_cols])
    t_eff = Y.shape[0]
    df2 = t_eff - 2 * lag - 1
    rss_u = float(e_u[:, 0] @ e_u[:, 0])
    rss_r = float(e_r[:, 0] @ e_r[:, 0])
    F = max(((rss_r - rss_u) / lag) / (rss_u / df2), 0.0)
    return F, float(stats.f.sf(F, lag, df2))


@dataclass
class GrangerResult:
    cause_block: tuple
    effect_block: tuple
    lag: int
    F: float
    p: float
    q: float = math.nan
    layer: str = ""
    order_method: str = "fixed"
    df1: int = 0
    df2: int = 0
    target: str = ""
    error: str = ""

    @property
    def cause(self) -> str:
        return "+".join(self.cause_block)

    @property
    def effect(self) -> str:
        return "+".join(self.effect_block)


def block_granger_arrays(cause, effect, order="bic", pmax: int = 10):
    """Wald F-test that every cause-block lag is zero in every effect equation.

    A VAR is fitted on ``[effect, cause]``. With ``m`` effect equations,
    ``c`` cause columns, lag order ``p`` and ``k = 1 + p (m + c)`` regressors
    per equation, the statistic is ``W / q`` with ``q = p c m`` restrictions
    and ``W = theta' [S_e (x) (X'X)^-1]^-1 theta``, where ``S_e`` is the
    effect residual covariance over ``T_eff - k``. It is referred to
    ``F(q, m (T_eff - k))``. With one cause and one effect column this is
    exactly the two-regression F of :func:`granger_pair`.

    Returns ``(F, p, lag, df1, df2)``.
    """
    cause = np.asarray(cause, dtype=np.float64)
    effect = np.asarray(effect, dtype=np.float64)
    if cause.ndim == 1:
        cause = cause.reshape(-1, 1)
    if effect.ndim == 1:
        effect = effect.reshape(-1, 1)
    if cause.shape[1] == 0 or effect.shape[1] == 0:
        raise ParameterError("cause and effect blocks must be non-empty")
    m, c = effect.shape[1], cause.shape[1]
    data = _unit_scale(np.column_stack([effect, cause]))
    model = var_fit(data, order=order, pmax=pmax)
    p = model.order
    n = m + c
    X = model.design
    Y = data[model.resid_rows][:, :m]
    B, E = ols(Y, X)
    k = X.shape[1]
    t_eff = X.shape[0]
    dof = t_eff - k
    if dof <= 0:
        raise SampleSizeError("no residual degrees of freedom")
    idx = [1 + (i * n) + m + j for i in range(p) for j in range(c)]
    S = E.T @ E / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    theta = B[idx, :].T.ravel()
    cov = np.kron(S, xtx_inv[np.ix_(idx, idx)])
    try:
        W = float(theta @ np.linalg.solve(cov, theta))
    except np.linalg.LinAlgError:
        raise CollinearityError("restriction covariance is singular") from None
    q = p * c * m
    df2 = m * dof
    F = max(W / q, 0.0)
    return F, float(stats.f.sf(F, q, df2)), p, q, df2


def block_granger(panel: Panel, cause_block: Sequence[str], effect_block: Sequence[str],
                  order="bic", pmax: int = 10, layer: str = "") -> GrangerResult:
    """Block Granger test on panel columns; ``order`` is ``"bic"`` or a fixed lag."""
    cause_block = tuple(cause_block)
    effect_block = tuple(effect_block)
    if not cause_block or not effect_block:
        raise ParameterError("cause and effect blocks must be non-empty")
    if set(cause_block) & set(effect_block):
        raise ParameterError("cause and effect blocks must be disjoint")
    F, p, lag, df1, df2 = block_granger_arrays(
        panel.matrix(cause_block), panel.matrix(effect_block), order=order, pmax=pmax
    )
    return GrangerResult(
        cause_block, effect_block, lag, F, p, layer=layer,
        order_method="bic" if order == "bic" else "fixed", df1=df1, df2=df2,
    )


def bh_fdr(pvals) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values (q-values), in input order."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.ndim != 1:
        p = p.ravel()
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise DomainError("p-values must lie in [0, 1]")
    m = p.shape[0]
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * (m / np.arange(1, m + 1))
    q_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(q_sorted, 1.0)
    return out


def assign_qvalues(results: list[GrangerResult]) -> None:
    """Fill ``q`` across one layer; failed tests (missing p) keep ``q`` missing."""
    ok = [r for r in results if math.isfinite(r.p)]
    if not ok:
        return
    q = bh_fdr([r.p for r in ok])
    for r, qv in zip(ok, q):
        r.q = float(qv)


@dataclass
class GrangerNetwork:
    nodes: list
    adjacency: np.ndarray
    min_p: np.ndarray

    def edges(self) -> list[tuple[str, str]]:
        i, j = np.nonzero(self.adjacency)
        return [(self.nodes[a], self.nodes[b]) for a, b in zip(i, j)]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for a, src in enumerate(self.nodes):
            for b, dst in enumerate(self.nodes):
                if a != b:
                    rows.append((src, dst, self.min_p[a, b], bool(self.adjacency[a, b])))
        return pd.DataFrame(rows, columns=["cause", "effect", "min_p", "edge"])


def build_granger_network(returns, nodes: Sequence[str], lags=range(1, 6),
                          alpha: float = 0.05) -> GrangerNetwork:
    """Directed network with ``i -> j`` iff ``min_l p_{i->j}(l) < alpha``.

    Columns are z-scored first. Pairs whose test fails are left without an
    edge and logged.
    """
    r = np.asarray(returns, dtype=np.float64)
    nodes = list(nodes)
    n = len(nodes)
    if r.shape[1] != n:
        raise ParameterError("one return column per node required")
    z = (r - np.nanmean(r, axis=0)) / np.nanstd(r, axis=0, ddof=1) if n else r
    adj = np.zeros((n, n), dtype=bool)
    min_p = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            best = math.inf
            for lag in lags:
                try:
                    _, pv = granger_pair(z[:, i], z[:, j], lag)
                except LvspillError as exc:
                    logger.warning("granger %s -> %s lag %d skipped: %s", nodes[i], nodes[j], lag, exc)
                    continue
                best = min(best, pv)
            if math.isfinite(best):
                min_p[i, j] = best
                adj[i, j] = best < alpha
    return GrangerNetwork(nodes, adj, min_p)


@dataclass(frozen=True)
class PageRankParams:
    damping: float = 0.85
    tol: float = 1e-10
    max_iter: int = 1000

    def __post_init__(self):
        if not 0 < self.damping < 1:
            raise ParameterError("damping must be in (0, 1)")
        if not self.tol > 0:
            raise ParameterError("tol must be > 0")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")


def transition_matrix(adjacency) -> np.ndarray:
    """Column-stochastic matrix; column ``i`` spreads node ``i``'s out-links,
    dangling nodes link uniformly to every node."""
    A = np.asarray(adjacency, dtype=np.float64)
    n = A.shape[0]
    out_deg = A.sum(axis=1)
    P = np.empty((n, n))
    for i in range(n):
        P[:, i] = A[i] / out_deg[i] if out_deg[i] > 0 else 1.0 / n
    return P


def pagerank(adjacency, params: PageRankParams = PageRankParams(), transpose: bool = False) -> np.ndarray:
    """PageRank scores by power iteration; ``adjacency[i, j]`` is an edge ``i -> j``.

    With ``transpose=True`` the ranking runs on the reversed graph, so nodes
    that send many edges score highest.
    """
    A = np.asarray(adjacency, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ParameterError("adjacency must be a non-empty square matrix")
    if transpose:
        A = A.T
    n = A.shape[0]
    P = transition_matrix(A)
    s = np.full(n, 1.0 / n)
    teleport = (1.0 - params.damping) / n
    for it in range(params.max_iter):
        nxt = params.damping * (P @ s) + teleport
        nxt /= nxt.sum()
        if np.abs(nxt - s).sum() < params.tol:
            s = nxt
            break
        s = nxt
    else:
        logger.warning("pagerank stopped at max_iter=%d before reaching tol", params.max_iter)
    return s


def select_core(nodes: Sequence[str], scores, N: int, whitelist=()) -> list[str]:
    """Top-``N`` nodes by score with whitelist members forced in.

    Ties break on the lexicographically smaller name. Forced members
    displace the lowest-ranked non-whitelisted picks. The result is in rank
    order.
    """
    nodes = list(nodes)
    scores = np.asarray(scores, dtype=np.float64)
    whitelist = list(dict.fromkeys(whitelist))
    if N > len(nodes):
        raise ParameterError(f"N={N} exceeds the {len(nodes)} available nodes")
    if N < len(whitelist):
        raise ParameterError("N must be at least the whitelist size")
    missing = [w for w in whitelist if w not in nodes]
    if missing:
        raise ParameterError(f"whitelisted assets not in the universe: {missing}")
    ranked = sorted(range(len(nodes)), key=lambda i: (-scores[i], nodes[i]))
    ranked_names = [nodes[i] for i in ranked]
    picked = ranked_names[:N]
    for w in whitelist:
        if w in picked:
            continue
        for k in range(len(picked) - 1, -1, -1):
            if picked[k] not in whitelist:
                del picked[k]
                break
        picked.append(w)
    pos = {name: i for i, name in enumerate(ranked_names)}
    return sorted(picked, key=pos.__getitem__)


@dataclass
class LayerConfig:
    """Column map for the A/B/C test grids.

    Layer A per core: one block test of ``lv_block`` -> return, then
    return -> each of ``ret_targets``. Layer B: the block of LV-family PC1s
    -> each returns PC, then the returns-PC block -> each LV-family PC.
    Layer C: the vol-PC block -> each crowding target, by BIC and at every
    fixed lag.
    """

    cores: list
    lv_block: tuple = ("amihud", "turnover", "garch_vol", "park_vol")
    ret_targets: tuple = ("amihud", "resid_turnover", "resid_garch_vol", "resid_park_vol")
    lv_groups: tuple = ("amihud", "turnover", "garch_vol", "park_vol")
    n_pc: int = 3
    vol_group: str = "park_vol"
    vol_k: int = 3
    crowding_targets: tuple = ("mkt_xsec_vol_l2",)
    fixed_lags: tuple = (1, 2, 3, 4, 5)
    pmax: int = 10


def _run(panel, cause, effect, order, pmax, layer, target=""):
    try:
        res = block_granger(panel, cause, effect, order=order, pmax=pmax, layer=layer)
    except LvspillError as exc:
        logger.warning("layer %s test %s -> %s failed: %s", layer, cause, effect, exc)
        res = GrangerResult(
            tuple(cause), tuple(effect), 0 if order == "bic" else int(order), math.nan, math.nan,
            layer=layer, order_method="bic" if order == "bic" else "fixed", error=str(exc),
        )
    res.target = target
    return res


def layer_a(features: Panel, cfg: LayerConfig) -> list[GrangerResult]:
    out = []
    for core in cfg.cores:
        ret = f"{core}_ret"
        out.append(_run(features, [f"{core}_{f}" for f in cfg.lv_block], [ret], "bic", cfg.pmax, "A"))
        for f in cfg.ret_targets:
            out.append(_run(features, [ret], [f"{core}_{f}"], "bic", cfg.pmax, "A"))
    assign_qvalues(out)
    return out


def layer_b(factors: Panel, cfg: LayerConfig) -> list[GrangerResult]:
    ret_pcs = [f"returns_PC{k}" for k in range(1, cfg.n_pc + 1)]
    lv_pc1 = [f"{g}_PC1" for g in cfg.lv_groups]
    out = [_run(factors, lv_pc1, [r], "bic", cfg.pmax, "B") for r in ret_pcs]
    for g in cfg.lv_groups:
        for k in range(1, cfg.n_pc + 1):
            out.append(_run(factors, ret_pcs, [f"{g}_PC{k}"], "bic", cfg.pmax, "B"))
    assign_qvalues(out)
    return out


def layer_c(factors: Panel, cfg: LayerConfig, targets=None) -> list[GrangerResult]:
    vol_pcs = [f"{cfg.vol_group}_PC{k}" for k in range(1, cfg.vol_k + 1)]
    out = []
    for target in targets or cfg.crowding_targets:
        out.append(_run(factors, vol_pcs, [target], "bic", cfg.pmax, "C", target))
        for lag in cfg.fixed_lags:
            out.append(_run(factors, vol_pcs, [target], lag, cfg.pmax, "C", target))
    assign_qvalues(out)
    return out


def run_layers(feature_panel: Panel, factor_panel: Panel, cfg: LayerConfig) -> dict:
    """Run the three layers; q-values are computed within each layer."""
    return {
        "A": layer_a(feature_panel, cfg),
        "B": layer_b(factor_panel, cfg),
        "C": layer_c(factor_panel, cfg),
    }


def results_frame(results: Sequence[GrangerResult], alpha: float = 0.05) -> pd.DataFrame:
    """Export table with columns ``cause,effect,lag,F,p,q,significant_at_0.05``.

    Significance is judged on the FDR-adjusted ``q``.
    """
    rows = [
        {
            "cause": r.cause,
            "effect": r.effect,
            "lag": r.lag,
            "F": r.F,
            "p": r.p,
            "q": r.q,
            f"significant_at_{alpha:g}": bool(math.isfinite(r.q) and r.q < alpha),
            "order": r.order_method,
            "df1": r.df1,
            "df2": r.df2,
        }
        for r in results
    ]
    return pd.DataFrame(
        rows,
        columns=["cause", "effect", "lag", "F", "p", "q", f"significant_at_{alpha:g}", "order", "df1", "df2"],
    )
