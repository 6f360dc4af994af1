"""Pipeline stages.

Every stage reads its inputs from CSVs in the run directory and writes its
outputs there; no stage touches another stage's in-memory state. The order
is fixed by :data:`STAGES`.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from .. import causality, factors, features, harx, varmodel
from ..errors import LvspillError, SchemaError
from ..ml.baselines import baselines as run_baselines
from ..ml import metrics as ml_metrics
from ..ml.gbt import GbtParams, gbt_train
from ..ml.shap import tree_shap
from ..ml.split import chrono_split, label_top_quantile
from ..panel import ColumnMeta, Panel, align_panels, load_asset_csv, read_panel_csv
from ..synthetic import bundled_dir
from .config import RunConfig

logger = logging.getLogger("lvspill.pipeline")

FLOAT_FORMAT = "%.17g"
MAIN_LV = ("amihud_PC1", "turnover_PC1")
VOL_TARGET = "mkt_xsec_vol_l2"


def workers() -> int:
    """Worker count from ``LVSPILL_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("LVSPILL_WORKERS", "1")))
    except ValueError:
        return 1


def write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> None:
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    logger.info("wrote %s (%d rows)", path.name, len(frame))


def read_csv(run_dir: Path, name: str) -> pd.DataFrame:
    path = run_dir / name
    if not path.exists():
        raise SchemaError(f"missing upstream artifact {name}; run the producing stage first")
    return pd.read_csv(path)


def _frame_to_panel(frame: pd.DataFrame) -> Panel:
    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d").values.astype("datetime64[D]")
    names = [c for c in frame.columns if c != "date"]
    return Panel(dates, [ColumnMeta(n) for n in names], frame[names].to_numpy(dtype=np.float64))


def _date_strings(dates) -> list:
    return [str(d) for d in np.asarray(dates, dtype="datetime64[D]")]


# ---------------------------------------------------------------- ingest

def discover_assets(data_dir: Path, assets) -> list:
    if assets:
        return list(assets)
    return sorted(p.stem for p in data_dir.glob("*.csv"))


def stage_ingest(cfg: RunConfig, run_dir: Path) -> None:
    data_dir = Path(cfg.data.data_dir) if cfg.data.data_dir else bundled_dir()
    if not data_dir.is_dir():
        raise SchemaError(f"data directory {data_dir} does not exist")
    assets = discover_assets(data_dir, cfg.data.assets)
    if not assets:
        raise SchemaError(f"no asset CSVs found in {data_dir}")
    panels = []
    for a in assets:
        path = data_dir / f"{a}.csv"
        if not path.exists():
            raise SchemaError(f"input file {path} not found")
        p = load_asset_csv(path, a)
        logger.info("loaded %s: %d rows", a, len(p))
        panels.append(p)
    panel = align_panels(panels, cfg.data.align)
    logger.info("aligned panel (%s): %d dates x %d columns", cfg.data.align, *panel.shape)
    panel.to_csv(run_dir / "panel.csv")


# -------------------------------------------------------------- features

def stage_features(cfg: RunConfig, run_dir: Path) -> None:
    panel = read_panel_csv(run_dir / "panel.csv")
    assets = panel.assets
    fw = cfg.features.turnover_fallback_window

    def one(a):
        return features.asset_features(panel.select([c.name for c in panel.columns if c.asset == a]), a, fw)

    if workers() > 1:
        with ThreadPoolExecutor(workers()) as pool:
            results = list(pool.map(one, assets))
    else:
        results = [one(a) for a in assets]
    feat = align_panels([r[0] for r in results], "inner")
    feat.to_csv(run_dir / "features.csv")
    write_csv(pd.DataFrame([r[1] for r in results]), run_dir / "feature_fits.csv")
    for a, (p, _) in zip(assets, results):
        n_missing = int(np.sum(~np.isfinite(p.values)))
        logger.info("%s features: %d missing cells", a, n_missing)

    # Granger network on returns and PageRank core selection
    ret_names = [f"{a}_ret" for a in assets]
    net = causality.build_granger_network(
        feat.matrix(ret_names), assets, lags=cfg.core.lags, alpha=cfg.core.alpha
    )
    write_csv(net.to_frame(), run_dir / "granger_network.csv")
    params = causality.PageRankParams(damping=cfg.core.damping, tol=cfg.core.tol)
    scores = causality.pagerank(net.adjacency, params, transpose=True)
    core = causality.select_core(assets, scores, cfg.core.N, cfg.core.whitelist)
    order = sorted(range(len(assets)), key=lambda i: (-scores[i], assets[i]))
    rank = {assets[i]: r + 1 for r, i in enumerate(order)}
    frame = pd.DataFrame(
        {
            "asset": assets,
            "pagerank": scores,
            "rank": [rank[a] for a in assets],
            "out_degree": net.adjacency.sum(axis=1).astype(int),
            "whitelisted": [a in cfg.core.whitelist for a in assets],
            "selected": [a in core for a in assets],
        }
    ).sort_values("rank", kind="stable")
    write_csv(frame, run_dir / "core_selection.csv")
    logger.info("network edges: %d; core: %s", len(net.edges()), ",".join(core))


def read_core(run_dir: Path) -> list:
    frame = read_csv(run_dir, "core_selection.csv")
    return frame.loc[frame["selected"].astype(bool), "asset"].tolist()


# --------------------------------------------------------------- factors

def group_pcs(feat: Panel, assets, n_pc: int, fit_rows=None) -> tuple[dict, dict]:
    """Per-family PCA scores (returns, amihud, ...) over ``assets``.

    Loadings are estimated on ``fit_rows`` (all rows by default); scores are
    produced for every row, missing where any input is missing.
    """
    scores, models = {}, {}
    for group in factors.PCA_GROUPS:
        cols = [f"{a}_{factors.GROUP_FIELDS[group]}" for a in assets]
        x = feat.matrix(cols)
        xf = x if fit_rows is None else x[fit_rows]
        model = factors.pca_fit(xf, columns=cols, k=n_pc)
        models[group] = model
        s = factors.pca_transform(model, x)
        for k in range(model.k):
            scores[f"{group}_PC{k + 1}"] = s[:, k]
    return scores, models


def main_var_block(cfg: RunConfig) -> list:
    vol = [f"{cfg.factors.vol_group}_PC{k}" for k in (1, 2)]
    return list(MAIN_LV) + vol + [VOL_TARGET]


def vol_var_block(cfg: RunConfig) -> list:
    return [f"{cfg.factors.vol_group}_PC{k}" for k in range(1, cfg.factors.n_pc + 1)] + [VOL_TARGET]


def stage_factors(cfg: RunConfig, run_dir: Path) -> None:
    feat = read_panel_csv(run_dir / "features.csv")
    core = read_core(run_dir)
    fc = cfg.factors
    universe = feat.assets if fc.pca_universe == "all" else core
    scores, models = group_pcs(feat, universe, fc.n_pc)
    out = dict(scores)

    vol = np.column_stack([scores[f"{fc.vol_group}_PC{k}"] for k in range(1, fc.n_pc + 1)])
    out[VOL_TARGET] = factors.crowding_target(vol, factors.CrowdingSpec(fc.n_pc))
    out[f"{VOL_TARGET}_rs{fc.rs_window}"] = factors.crowding_target(
        vol, factors.CrowdingSpec(fc.n_pc, "rolling", fc.rs_window)
    )
    for k in fc.leave_out_k:
        out[f"{VOL_TARGET}_lo{k}"] = factors.crowding_target(vol, factors.CrowdingSpec.leave_k_out(fc.n_pc, k))

    mkt = np.mean(feat.matrix([f"{a}_ret" for a in core]), axis=1)
    out.update(factors.legacy_rv_targets(mkt, fc.rs_window))

    # risk index from the main-VAR block and its structural shocks
    block = main_var_block(cfg)
    y = np.column_stack([out[c] for c in block])
    m = varmodel.var_fit(y, "bic", cfg.var.pmax, names=block)
    u = np.full(y.shape, np.nan)
    u[m.resid_rows] = varmodel.structural_shocks(m)
    spec = factors.RiskIndexSpec(fc.H, fc.feat_window, fc.shock_window)
    disp = vol if fc.risk_features == "vol_pcs" else y[:, :-1]
    ri = factors.risk_index(disp, u, spec)
    out[f"risk_idx_H{fc.H}"] = ri["index"]
    logger.info("risk index: VAR(%d) on %d rows, %d finite index values",
                m.order, m.nobs, int(np.isfinite(ri["index"]).sum()))

    frame = pd.DataFrame(out)
    frame.insert(0, "date", _date_strings(feat.dates))
    write_csv(frame, run_dir / "factors.csv")

    rows, expl = [], []
    for group, model in models.items():
        for j, col in enumerate(model.columns):
            for k in range(model.k):
                rows.append({"group": group, "column": col, "pc": k + 1, "loading": model.loadings[j, k]})
        for k, r in enumerate(model.all_explained_ratio):
            expl.append({"group": group, "pc": k + 1, "explained_ratio": r,
                         "cumulative": float(np.sum(model.all_explained_ratio[: k + 1])),
                         "retained": k < model.k})
    write_csv(pd.DataFrame(rows), run_dir / "pca_loadings.csv")
    write_csv(pd.DataFrame(expl), run_dir / "pca_explained.csv")


# ---------------------------------------------------------------- layers

def layer_config(cfg: RunConfig, core: list, targets=None) -> causality.LayerConfig:
    ls = cfg.layers
    return causality.LayerConfig(
        cores=core,
        lv_block=tuple(ls.lv_block),
        ret_targets=tuple(ls.ret_targets),
        lv_groups=tuple(ls.lv_groups),
        n_pc=cfg.factors.n_pc,
        vol_group=cfg.factors.vol_group,
        vol_k=cfg.factors.n_pc,
        crowding_targets=tuple(targets or (VOL_TARGET,)),
        fixed_lags=tuple(ls.fixed_lags),
        pmax=ls.pmax,
    )


def stage_layers(cfg: RunConfig, run_dir: Path) -> None:
    feat = read_panel_csv(run_dir / "features.csv")
    fac = _frame_to_panel(read_csv(run_dir, "factors.csv"))
    lc = layer_config(cfg, read_core(run_dir))
    res = causality.run_layers(feat, fac, lc)
    for layer, results in res.items():
        frame = causality.results_frame(results, cfg.layers.alpha)
        write_csv(frame, run_dir / f"layer{layer}.csv")
        failed = sum(1 for r in results if r.error)
        logger.info("layer %s: %d tests, %d significant (q < %g), %d failed",
                    layer, len(results), int(frame.iloc[:, 6].sum()), cfg.layers.alpha, failed)


# ------------------------------------------------------------------- var

def _var_outputs(m: varmodel.VarModel, prefix: str, cfg: RunConfig, run_dir: Path) -> dict:
    H = cfg.var.horizons
    irf = varmodel.orth_irf(m, H)
    fv = varmodel.fevd(m, H)
    names = m.names
    rows = [(h, names[i], names[j], irf[h, i, j])
            for h in range(irf.shape[0]) for i in range(m.n) for j in range(m.n)]
    write_csv(pd.DataFrame(rows, columns=["horizon", "response", "shock", "value"]), run_dir / f"{prefix}_irf.csv")
    rows = [(h + 1, names[i], names[j], fv[h, i, j])
            for h in range(fv.shape[0]) for i in range(m.n) for j in range(m.n)]
    write_csv(pd.DataFrame(rows, columns=["horizon", "response", "shock", "value"]), run_dir / f"{prefix}_fevd.csv")
    lb = []
    for i, name in enumerate(names):
        q, p = varmodel.ljung_box(m.residuals[:, i], cfg.var.ljung_box_lags)
        lb.append({"equation": name, "lags": cfg.var.ljung_box_lags, "Q": q, "p": p})
    write_csv(pd.DataFrame(lb), run_dir / f"{prefix}_ljungbox.csv")
    return {
        "model": prefix,
        "variables": "|".join(names),
        "order": m.order,
        "nobs": m.nobs,
        "spectral_radius": m.spectral_radius(),
        "bic": m.bic.get(m.order, math.nan),
        "min_ljungbox_p": min(r["p"] for r in lb),
    }


def stage_var(cfg: RunConfig, run_dir: Path) -> None:
    fac = read_csv(run_dir, "factors.csv")
    summary = []
    fits = {}
    for prefix, block in (("var_main", main_var_block(cfg)), ("var_vol", vol_var_block(cfg))):
        m = varmodel.var_fit(fac[block].to_numpy(dtype=np.float64), "bic", cfg.var.pmax, names=block)
        fits[prefix] = m
        summary.append(_var_outputs(m, prefix, cfg, run_dir))
        logger.info("%s: VAR(%d), %d obs, spectral radius %.4f",
                    prefix, m.order, m.nobs, summary[-1]["spectral_radius"])
    write_csv(pd.DataFrame(summary), run_dir / "var_summary.csv")

    # ordering sensitivity: FEVD share of the target at the last horizon under
    # the default ordering versus the target-first and reversed orderings
    block = main_var_block(cfg)
    target = block[-1]
    H = cfg.var.horizons
    orderings = {"default": block, "target_first": [target] + block[:-1], "reversed": block[::-1]}
    rows = []
    for label, order in orderings.items():
        m = varmodel.var_fit(fac[order].to_numpy(dtype=np.float64), fits["var_main"].order, names=order)
        fv = varmodel.fevd(m, H)
        i = order.index(target)
        for j, shock in enumerate(order):
            rows.append({"ordering": label, "response": target, "shock": shock,
                         "horizon": H, "share": fv[-1, i, j]})
    write_csv(pd.DataFrame(rows), run_dir / "var_ordering_sensitivity.csv")


# ------------------------------------------------------------------ harx

def stage_harx(cfg: RunConfig, run_dir: Path) -> None:
    fac = read_csv(run_dir, "factors.csv")
    vol_cols = [f"{cfg.factors.vol_group}_PC{k}" for k in range(1, cfg.factors.n_pc + 1)]
    v = fac[vol_cols].to_numpy(dtype=np.float64)
    summary = []
    for target in cfg.harx.targets:
        if target not in fac.columns:
            logger.warning("harx: target %s not in factors.csv, skipped", target)
            continue
        try:
            fit = harx.harx_fit(fac[target].to_numpy(dtype=np.float64), v, cfg.harx.nw_lag,
                                tuple(cfg.harx.windows), vol_cols)
        except LvspillError as exc:
            logger.warning("harx %s failed: %s", target, exc)
            continue
        write_csv(fit.to_frame(), run_dir / f"harx_{target}.csv")
        summary.append({"target": target, "nobs": fit.nobs, "nw_lag": fit.nw_lag, "r2": fit.r2,
                        "max_abs_tstat_slope": float(np.max(np.abs(fit.tstats[1:]))),
                        "min_p_slope": float(np.min(fit.pvalues[1:]))})
    write_csv(pd.DataFrame(summary), run_dir / "harx_summary.csv")


# -------------------------------------------------------------------- ml

def build_design(columns: dict, index, H: int, lag: int = 1):
    """Lagged feature matrix and forward target.

    ``X[t, j] = columns[j][t - lag]`` (plus the lagged index as the last
    column) and ``y[t] = index[t + H]``. Pure: it only shifts arrays, so a
    row-ordinal probe can verify the alignment.
    """
    index = np.asarray(index, dtype=np.float64)
    names = list(columns) + ["risk_idx_lag1"]
    raw = np.column_stack([np.asarray(columns[c], dtype=np.float64) for c in columns] + [index])
    X = np.full(raw.shape, np.nan)
    X[lag:] = raw[:-lag]
    y = factors.forward_target(index, H)
    return X, y, names


def ml_dataset(cfg: RunConfig, feat: Panel, fac: pd.DataFrame, core: list):
    """Design matrix, target, labels and split rows for the ML stage.

    PCs are re-estimated on training rows only. Returns a dict.
    """
    fc, mc = cfg.factors, cfg.ml
    H = fc.H
    index = fac[f"risk_idx_H{H}"].to_numpy(dtype=np.float64)
    y_all = factors.forward_target(index, H)
    usable = np.nonzero(np.isfinite(y_all) & np.r_[False, np.isfinite(index[:-1])])[0]
    start = int(usable[0])
    n = int(usable[-1]) + 1 - start
    split = chrono_split(n, tuple(mc.fractions))
    gap = H if mc.embargo is None else int(mc.embargo)
    rows = {k: v + start for k, v in split.embargoed(gap).items()}

    lv_fields = [f for f in cfg.layers.lv_block] + ["resid_garch_vol", "resid_park_vol", "resid_turnover"]
    cols = {}
    for a in core:
        for f in dict.fromkeys(lv_fields):
            cols[f"{a}_{f}"] = feat.column(f"{a}_{f}")
    universe = feat.assets if fc.pca_universe == "all" else core
    # loadings fit on train rows lagged by one day (the rows the features come from)
    pcs, _ = group_pcs(feat, universe, fc.n_pc, fit_rows=rows["train"] - 1)
    cols.update(pcs)
    cols[VOL_TARGET] = fac[VOL_TARGET].to_numpy(dtype=np.float64)
    X, y, names = build_design(cols, index, H)

    labels, cut = label_top_quantile(y, split, mc.quantile, train_rows=rows["train"])
    return {"X": X, "y": y, "labels": labels, "cut": cut, "rows": rows, "names": names,
            "dates": feat.dates, "split": split, "start": start}


def stage_ml(cfg: RunConfig, run_dir: Path) -> None:
    feat = read_panel_csv(run_dir / "features.csv")
    fac = read_csv(run_dir, "factors.csv")
    core = read_core(run_dir)
    d = ml_dataset(cfg, feat, fac, core)
    X, y, labels, rows, names = d["X"], d["y"], d["labels"], d["rows"], d["names"]
    tr, va = rows["train"], rows["valid"]
    logger.info("ml rows: train %d, valid %d, test %d; label cut %.6g",
                len(tr), len(va), len(rows["test"]), d["cut"])
    mc = cfg.ml
    params = GbtParams(mc.max_depth, mc.learning_rate, mc.n_rounds, mc.early_stopping_rounds,
                       mc.min_child_weight, mc.reg_lambda, mc.gamma, cfg.seed)

    reg = gbt_train(X[tr], y[tr], X[va], y[va], "squared_error", params, names)
    cls = gbt_train(X[tr], labels[tr], X[va], labels[va], "logistic", params, names)
    y_pred = reg.predict(X)
    score = cls.predict(X)
    choice = ml_metrics.choose_threshold(score[va], labels[va])
    logger.info("gbt regression best_iteration=%d, classifier best_iteration=%d, tau=%.6g (valid F1 %.4f)",
                reg.best_iteration, cls.best_iteration, choice.tau, choice.valid_f1)

    report = ml_metrics.EvalReport(tau=choice.tau, threshold=choice)
    dates = _date_strings(d["dates"])
    for split_name, r in rows.items():
        report.regression[split_name] = ml_metrics.regression_metrics(y[r], y_pred[r])
        report.classification[split_name] = ml_metrics.classification_metrics(labels[r], score[r], choice.tau)
        pred = pd.DataFrame(
            {
                "date": [dates[i] for i in r],
                "y_true": y[r],
                "y_pred": y_pred[r],
                "score": score[r],
                "label": labels[r].astype(int),
                "pred_label": (score[r] >= choice.tau).astype(int),
            }
        )
        write_csv(pred, run_dir / f"ml_predictions_{split_name}.csv")

    te = rows["test"]
    phi, base = tree_shap(cls, X[te])
    report.shap, report.shap_base = phi, base
    shap = pd.DataFrame(phi, columns=names)
    shap.insert(0, "base_value", base)
    shap.insert(0, "date", [dates[i] for i in te])
    write_csv(shap, run_dir / "shap_values.csv")

    metric_rows = report.rows("gbt")
    for name, rep in run_baselines(X, y, labels, rows, ar_column=len(names) - 1).items():
        metric_rows.extend(rep.rows(name))
    metric_rows.append({"model": "gbt", "task": "regression", "split": "train", "metric": "best_iteration",
                        "value": reg.best_iteration})
    metric_rows.append({"model": "gbt", "task": "classification", "split": "train", "metric": "best_iteration",
                        "value": cls.best_iteration})
    metric_rows.append({"model": "labels", "task": "classification", "split": "train", "metric": "cut",
                        "value": d["cut"]})
    write_csv(pd.DataFrame(metric_rows, columns=["model", "task", "split", "metric", "value"]),
              run_dir / "ml_metrics.csv")

    fpr, tpr, thr = ml_metrics.roc_curve(labels[te], score[te])
    write_csv(pd.DataFrame({"fpr": fpr, "tpr": tpr, "threshold": thr}), run_dir / "cls_test_roc_curve.csv")
    prec, rec, thr = ml_metrics.pr_curve(labels[te], score[te])
    write_csv(pd.DataFrame({"recall": rec, "precision": prec, "threshold": thr}), run_dir / "cls_test_pr_curve.csv")
    logger.info("test ROC-AUC %.4f, PR-AUC %.4f, R2 %.4f",
                report.classification["test"]["roc_auc"], report.classification["test"]["pr_auc"],
                report.regression["test"]["r2"])


# ---------------------------------------------------------------- robust

def _neg_log10(p: float) -> float:
    if not math.isfinite(p):
        return math.nan
    return math.inf if p == 0 else -math.log10(p)


def robustness_grid(vol_scores, rs_windows=(63, 126, 252), fixed_lags=(1, 2, 3, 4, 5),
                    raw_target=None) -> pd.DataFrame:
    """Layer-C p-value for every (target variant, fixed lag) cell.

    Variants are the raw crowding target (full-sample standardization,
    window 0) and one rolling-standardized target per window in
    ``rs_windows``, all built from ``vol_scores`` (T x K). A failing cell is
    logged and left missing.
    """
    vol = np.asarray(vol_scores, dtype=np.float64)
    K = vol.shape[1]
    raw = factors.crowding_target(vol, factors.CrowdingSpec(K)) if raw_target is None else raw_target
    targets = {0: np.asarray(raw, dtype=np.float64)}
    for W in rs_windows:
        targets[int(W)] = factors.crowding_target(vol, factors.CrowdingSpec(K, "rolling", int(W)))
    rows = []
    for W, target in targets.items():
        label = "raw" if W == 0 else f"rs{W}"
        for lag in fixed_lags:
            F = p = math.nan
            try:
                F, p, _, _, _ = causality.block_granger_arrays(vol, target.reshape(-1, 1), order=int(lag))
            except LvspillError as exc:
                logger.warning("robust cell (%s, lag %d) failed: %s", label, lag, exc)
            rows.append({"target": label, "window": W, "lag": int(lag), "F": F, "p": p,
                         "neg_log10_p": _neg_log10(p)})
    return pd.DataFrame(rows, columns=["target", "window", "lag", "F", "p", "neg_log10_p"])


def stage_robust(cfg: RunConfig, run_dir: Path) -> None:
    fac = read_csv(run_dir, "factors.csv")
    fc = cfg.factors
    vol_cols = [f"{fc.vol_group}_PC{k}" for k in range(1, fc.n_pc + 1)]
    grid = robustness_grid(fac[vol_cols].to_numpy(dtype=np.float64), cfg.robust.rs_windows,
                           cfg.robust.fixed_lags, raw_target=fac[VOL_TARGET].to_numpy(dtype=np.float64))
    n_missing = int(grid["p"].isna().sum())
    logger.info("robust grid: %d cells, %d missing", len(grid), n_missing)
    write_csv(grid, run_dir / "robust_layerC_table.csv")


# ---------------------------------------------------------------- report

def stage_report(cfg: RunConfig, run_dir: Path) -> None:
    from .plots import emit_plots

    emit_plots(run_dir)


STAGES = (
    ("ingest", stage_ingest),
    ("features", stage_features),
    ("factors", stage_factors),
    ("layers", stage_layers),
    ("var", stage_var),
    ("harx", stage_harx),
    ("ml", stage_ml),
    ("robust", stage_robust),
    ("report", stage_report),
)
