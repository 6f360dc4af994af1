"""Command line entry point: ``lvspill <stage|all> [--config] [--out] [--seed]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError
from .config import RunConfig, load_config
from .pipeline import run_pipeline, run_stages, write_manifest
from .stages import STAGES


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lvspill", description="liquidity/volatility spillover pipeline")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in [n for n, _ in STAGES] + ["all"]:
        sp = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage")
        sp.add_argument("--config", type=Path, help="JSON run configuration")
        if name == "all":
            sp.add_argument("--out", type=Path, help="output root; a run_<UTC timestamp> folder is created inside")
        else:
            sp.add_argument("--out", type=Path, required=True, help="run directory to read from and write to")
        sp.add_argument("--seed", type=int, help="override the configured seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except (ConfigError, OSError) as exc:
        print(f"lvspill: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.command == "all":
        if args.out is not None:
            cfg.output_root = str(args.out)
        art = run_pipeline(cfg)
        print(art.path)
        if not art.ok:
            print(f"lvspill: stage {art.failed_stage} failed, see {art.path / 'pipeline.log'}", file=sys.stderr)
            return 1
        return 0
    run_dir = args.out
    run_dir.mkdir(parents=True, exist_ok=True)
    if not (run_dir / "config.json").exists():
        (run_dir / "config.json").write_text(cfg.to_json())
    failed = run_stages(cfg, run_dir, [args.command])
    if args.command == "report":
        write_manifest(run_dir)
    if failed:
        print(f"lvspill: stage {failed} failed, see {run_dir / 'pipeline.log'}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
