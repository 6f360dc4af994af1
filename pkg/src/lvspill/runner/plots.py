"""Figures, each drawn from a single CSV in the run directory.

Plots are written as SVG and PNG on a fixed canvas with the timestamp and
software metadata stripped, so reruns produce identical files.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger("lvspill.pipeline")

FIGSIZE = (7.0, 4.5)
DPI = 100
PLOT_SOURCES = {
    "heatmap_layerA": "layerA.csv",
    "robust_summary_layerC_heatmap": "robust_layerC_table.csv",
    "var_main_fevd": "var_main_fevd.csv",
    "cls_test_roc_curve": "cls_test_roc_curve.csv",
    "cls_test_pr_curve": "cls_test_pr_curve.csv",
}


def _neglog10(p):
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return -np.log10(p)


def _save(fig, run_dir: Path, stem: str) -> list:
    plt.rcParams["svg.hashsalt"] = "lvspill"
    paths = [run_dir / f"{stem}.svg", run_dir / f"{stem}.png"]
    fig.savefig(paths[0], format="svg", metadata={"Date": None, "Creator": None})
    fig.savefig(paths[1], format="png", dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return paths


def layer_a_grid(frame: pd.DataFrame):
    """``(assets, tests, matrix of -log10 p)`` with one cell per Layer-A test."""
    assets, tests, cells = [], [], {}
    for r in frame.itertuples(index=False):
        asset, field = r.effect.split("_", 1)
        if "+" in r.cause:
            test = "LV block -> ret"
        else:
            test = f"ret -> {field}"
        if asset not in assets:
            assets.append(asset)
        if test not in tests:
            tests.append(test)
        cells[(asset, test)] = r.p
    M = np.full((len(assets), len(tests)), np.nan)
    for (a, t), p in cells.items():
        M[assets.index(a), tests.index(t)] = _neglog10(p)
    return assets, tests, M


def _heatmap(ax, M, rows, cols, title):
    im = ax.imshow(np.ma.masked_invalid(M), cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(cols)), cols, rotation=30, ha="right", fontsize=8)
    ax.set_yticks(range(len(rows)), rows, fontsize=8)
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            v = M[i, j]
            ax.text(j, i, "nan" if not math.isfinite(v) else f"{v:.2f}", ha="center", va="center",
                    fontsize=7, color="white")
    ax.set_title(title, fontsize=10)
    return im


def plot_layer_a(run_dir: Path) -> list:
    assets, tests, M = layer_a_grid(pd.read_csv(run_dir / "layerA.csv"))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    im = _heatmap(ax, M, assets, tests, "Layer A (-log10 p)")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    return _save(fig, run_dir, "heatmap_layerA")


def plot_robust(run_dir: Path) -> list:
    t = pd.read_csv(run_dir / "robust_layerC_table.csv")
    targets = list(dict.fromkeys(t["target"]))
    lags = sorted(set(t["lag"]))
    M = np.full((len(targets), len(lags)), np.nan)
    for r in t.itertuples(index=False):
        M[targets.index(r.target), lags.index(r.lag)] = _neglog10(r.p)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    im = _heatmap(ax, M, targets, [f"lag {l}" for l in lags], "Layer C robustness (-log10 p)")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    return _save(fig, run_dir, "robust_summary_layerC_heatmap")


def fevd_shares(frame: pd.DataFrame, response: str | None = None):
    """``(horizons, shocks, shares[h, j])`` for one response (default: the last)."""
    responses = list(dict.fromkeys(frame["response"]))
    response = responses[-1] if response is None else response
    sub = frame[frame["response"] == response]
    shocks = list(dict.fromkeys(sub["shock"]))
    table = sub.pivot(index="horizon", columns="shock", values="value")[shocks]
    return table.index.to_numpy(), shocks, table.to_numpy()


def plot_fevd(run_dir: Path) -> list:
    h, shocks, S = fevd_shares(pd.read_csv(run_dir / "var_main_fevd.csv"))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.stackplot(h, S.T, labels=shocks)
    ax.set_xlim(h[0], h[-1])
    ax.set_ylim(0, 1)
    ax.set_xlabel("horizon (days)")
    ax.set_ylabel("variance share")
    ax.set_title("Main VAR FEVD of the crowding target", fontsize=10)
    ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    return _save(fig, run_dir, "var_main_fevd")


def plot_roc(run_dir: Path) -> list:
    c = pd.read_csv(run_dir / "cls_test_roc_curve.csv")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(c["fpr"], c["tpr"], lw=1.5)
    ax.plot([0, 1], [0, 1], ls="--", color="grey", lw=0.8)
    auc = float(np.sum(np.diff(c["fpr"]) * 0.5 * (c["tpr"].to_numpy()[1:] + c["tpr"].to_numpy()[:-1])))
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"Test ROC (AUC {auc:.3f})", fontsize=10)
    fig.tight_layout()
    return _save(fig, run_dir, "cls_test_roc_curve")


def plot_pr(run_dir: Path) -> list:
    c = pd.read_csv(run_dir / "cls_test_pr_curve.csv")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.step(c["recall"], c["precision"], where="post", lw=1.5)
    prevalence = float(c["precision"].iloc[-1])
    ax.axhline(prevalence, ls="--", color="grey", lw=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title("Test PR curve (threshold fixed on validation)", fontsize=10)
    fig.tight_layout()
    return _save(fig, run_dir, "cls_test_pr_curve")


PLOTTERS = {
    "heatmap_layerA": plot_layer_a,
    "robust_summary_layerC_heatmap": plot_robust,
    "var_main_fevd": plot_fevd,
    "cls_test_roc_curve": plot_roc,
    "cls_test_pr_curve": plot_pr,
}


def emit_plots(run_dir) -> list:
    """Draw every figure whose source CSV exists; missing sources are logged
    and skipped."""
    run_dir = Path(run_dir)
    written = []
    with plt.rc_context({"svg.hashsalt": "lvspill", "font.family": "DejaVu Sans"}):
        for stem, fn in PLOTTERS.items():
            src = run_dir / PLOT_SOURCES[stem]
            if not src.exists():
                logger.warning("plot %s skipped: %s missing", stem, src.name)
                continue
            written.extend(fn(run_dir))
            logger.info("plot %s written", stem)
    return written
