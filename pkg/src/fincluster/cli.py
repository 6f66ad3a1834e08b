"""Subcommand driver: one subcommand per pipeline stage.

Each stage reads the prior stage's files from the workspace and writes its
own artifacts plus a manifest. Exit status 0 on success, 2 on configuration
or dependency errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .panel import PanelError
from .pipeline import (
    ConfigError,
    STAGES,
    StageDependencyError,
    apply_overrides,
    load_config,
    run_stage,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fincluster",
        description=(
            "Staged clustering pipeline for quarterly financial panels: "
            "ingest -> ratios -> fuse -> distances -> cluster -> evaluate -> report."
        ),
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        sp = sub.add_parser(stage, help=f"run the {stage} stage")
        sp.add_argument("--config", type=Path, default=None, help="INI config file")
        sp.add_argument("--workspace", type=Path, default=None, help="artifact directory")
        sp.add_argument("--seed", type=int, default=None, help="run seed")
        sp.add_argument("--format", choices=("csv", "json"), default=None,
                        help="format for auxiliary tables")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config value")
        if stage == "ingest":
            sp.add_argument("--input", type=Path, default=None, help="source table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        apply_overrides(config, args.set)
        if args.workspace is not None:
            config.workspace = args.workspace
        if args.seed is not None:
            config.seed = args.seed
        if args.format is not None:
            config.fmt = args.format
        if args.stage == "ingest" and args.input is not None:
            config.input_path = args.input
        outputs = run_stage(args.stage, config)
    except (ConfigError, PanelError, StageDependencyError, ValueError) as exc:
        print(f"fincluster {args.stage}: error: {exc}", file=sys.stderr)
        return 2
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
