"""Run directories, logging, the stage loop and the artifact manifest."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig
from .stages import STAGES

logger = logging.getLogger("lvspill.pipeline")

# stage -> module name used in failure messages
STAGE_MODULE = {
    "ingest": "panel",
    "features": "features",
    "factors": "factors",
    "layers": "causality",
    "var": "varmodel",
    "harx": "harx",
    "ml": "mlproto",
    "robust": "runner",
    "report": "runner",
}

# every file a default `all` run must produce
DOCUMENTED_ARTIFACTS = (
    "config.json",
    "pipeline.log",
    "panel.csv",
    "panel_columns.csv",
    "features.csv",
    "features_columns.csv",
    "feature_fits.csv",
    "granger_network.csv",
    "core_selection.csv",
    "factors.csv",
    "pca_loadings.csv",
    "pca_explained.csv",
    "layerA.csv",
    "layerB.csv",
    "layerC.csv",
    "var_main_irf.csv",
    "var_main_fevd.csv",
    "var_main_ljungbox.csv",
    "var_vol_irf.csv",
    "var_vol_fevd.csv",
    "var_vol_ljungbox.csv",
    "var_summary.csv",
    "var_ordering_sensitivity.csv",
    "harx_summary.csv",
    "ml_predictions_train.csv",
    "ml_predictions_valid.csv",
    "ml_predictions_test.csv",
    "ml_metrics.csv",
    "shap_values.csv",
    "cls_test_roc_curve.csv",
    "cls_test_pr_curve.csv",
    "robust_layerC_table.csv",
    "heatmap_layerA.svg",
    "heatmap_layerA.png",
    "robust_summary_layerC_heatmap.svg",
    "robust_summary_layerC_heatmap.png",
    "var_main_fevd.svg",
    "var_main_fevd.png",
    "cls_test_roc_curve.svg",
    "cls_test_roc_curve.png",
    "cls_test_pr_curve.svg",
    "cls_test_pr_curve.png",
    "manifest.json",
)


def documented_artifacts(cfg: RunConfig) -> list:
    return list(DOCUMENTED_ARTIFACTS) + [f"harx_{t}.csv" for t in cfg.harx.targets]


@dataclass
class RunArtifacts:
    path: Path
    files: dict = field(default_factory=dict)
    failed_stage: str | None = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    def csv_hashes(self) -> dict:
        return {k: v["sha256"] for k, v in self.files.items() if k.endswith(".csv")}


def make_run_dir(root) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("run_%Y%m%d_%H%M%S")
    path = root / stamp
    k = 1
    while path.exists():
        path = root / f"{stamp}_{k}"
        k += 1
    path.mkdir()
    return path


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(run_dir: Path) -> dict:
    files = {}
    for p in sorted(run_dir.iterdir()):
        if p.is_file() and p.name != "manifest.json":
            files[p.name] = {"sha256": sha256(p), "bytes": p.stat().st_size}
    (run_dir / "manifest.json").write_text(json.dumps({"files": files}, indent=2, sort_keys=True) + "\n")
    return files


def attach_log(run_dir: Path) -> logging.Handler:
    handler = logging.FileHandler(run_dir / "pipeline.log", mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("lvspill")
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    return handler


def run_stages(cfg: RunConfig, run_dir: Path, names) -> str | None:
    """Run the named stages in pipeline order; returns the failing stage or None."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    handler = attach_log(run_dir)
    try:
        for name, fn in STAGES:
            if name not in names:
                continue
            logger.info("stage %s: start", name)
            t0 = time.perf_counter()
            try:
                fn(cfg, run_dir)
            except Exception as exc:
                module = STAGE_MODULE[name]
                logger.error("stage %s (%s) failed: %s: %s", name, module, type(exc).__name__, exc)
                logger.debug("%s", traceback.format_exc())
                (run_dir / "FAILED").write_text(
                    f"stage: {name}\nmodule: {module}\nerror: {type(exc).__name__}: {exc}\n"
                )
                return name
            logger.info("stage %s: done in %.2fs", name, time.perf_counter() - t0)
        return None
    finally:
        logging.getLogger("lvspill").removeHandler(handler)
        handler.close()


def run_pipeline(cfg: RunConfig, run_dir=None) -> RunArtifacts:
    """Execute every stage into a fresh ``run_<UTC timestamp>`` directory
    (or ``run_dir`` when given) and write ``manifest.json``."""
    cfg.validate()
    run_dir = make_run_dir(cfg.output_root) if run_dir is None else Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(cfg.to_json())
    failed = run_stages(cfg, run_dir, [n for n, _ in STAGES])
    files = write_manifest(run_dir)
    return RunArtifacts(run_dir, files, failed)
