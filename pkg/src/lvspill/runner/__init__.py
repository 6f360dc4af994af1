"""Configuration, stage orchestration, plots and the command line."""

from .config import RunConfig, config_from_dict, load_config
from .pipeline import DOCUMENTED_ARTIFACTS, RunArtifacts, documented_artifacts, run_pipeline, run_stages

__all__ = [
    "DOCUMENTED_ARTIFACTS",
    "RunArtifacts",
    "RunConfig",
    "config_from_dict",
    "documented_artifacts",
    "load_config",
    "run_pipeline",
    "run_stages",
]
