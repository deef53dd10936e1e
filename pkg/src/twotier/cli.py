"""Command-line entry point: ``twotier <command> [--config F] [--out DIR] [--seed N] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import RunConfig, read_config, resolve_out_dir
from .errors import TwoTierError


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration (defaults are used when omitted)")
    p.add_argument("--out", help="run directory; overrides $TWOTIER_OUT and run.out_dir")
    p.add_argument("--seed", type=int, help="global seed applied to every seeded component")


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="training dataset tag (default: run.dataset)")
    p.add_argument("--augment", action="store_true", help="use the model trained on the augmented train split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twotier", description="Two-tier ensemble training and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the synthetic datasets")
    _common(p)

    p = sub.add_parser("train", help="train base instances or fusion weights")
    _common(p)
    _dataset_args(p)
    p.add_argument("--phase", choices=("base", "fusion"), required=True)
    p.add_argument("--predictions", help="prediction-record CSV to fuse instead of trained base instances")

    p = sub.add_parser("evaluate", help="score a trained ensemble on a test split")
    _common(p)
    _dataset_args(p)
    p.add_argument("--eval-dataset", help="dataset to evaluate on (default: the training dataset)")

    p = sub.add_parser("cross-eval", help="evaluate across datasets, in both directions when possible")
    _common(p)
    _dataset_args(p)
    p.add_argument("--eval-dataset", required=True)

    p = sub.add_parser("report", help="collect evaluations into tables and a performance matrix")
    _common(p)
    return parser


def _load(args) -> tuple[RunConfig, Path]:
    cfg = read_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg, resolve_out_dir(cfg, args.out)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg, out = _load(args)
        if args.command == "synth-data":
            for path in pipeline.cmd_synth_data(cfg, out):
                print(path)
        elif args.command == "train":
            print(pipeline.cmd_train(cfg, out, args.phase, args.dataset, args.augment, args.predictions))
        elif args.command == "evaluate":
            d = pipeline.cmd_evaluate(cfg, out, args.dataset, args.augment, args.eval_dataset)
            sys.stdout.write((d / "table.md").read_text(encoding="utf-8"))
        elif args.command == "cross-eval":
            d, notices = pipeline.cmd_cross_eval(cfg, out, args.dataset, args.eval_dataset, args.augment)
            for n in notices:
                print(f"notice: {n}", file=sys.stderr)
            sys.stdout.write((d / "table.md").read_text(encoding="utf-8"))
        elif args.command == "report":
            print(pipeline.cmd_report(out) / "report.md")
    except (TwoTierError, OSError) as exc:
        print(f"twotier {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
