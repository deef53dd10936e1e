#!/usr/bin/env python3
"""Run the whole synthetic experiment suite and build the report.

Trains on both synthetic datasets with and without augmentation, evaluates
intra- and cross-dataset, then collects four tables plus the performance matrix:

    python scripts/run_suite.py --out runs/suite [--config my.ini] [--seed 0]
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from twotier import pipeline
from twotier.config import RunConfig, read_config, resolve_out_dir


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config")
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()

    cfg = read_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = resolve_out_dir(cfg, args.out)
    names = [cfg.synthetic.name, cfg.synthetic.shifted_name]

    t0 = time.perf_counter()
    pipeline.cmd_synth_data(cfg, out)
    for augmented in (False, True):
        for ds in names:
            pipeline.cmd_train(cfg, out, "base", ds, augmented)
            pipeline.cmd_train(cfg, out, "fusion", ds, augmented)
            pipeline.cmd_evaluate(cfg, out, ds, augmented)
            print(f"[{time.perf_counter() - t0:6.1f}s] trained and evaluated {pipeline.model_tag(ds, augmented)}")
        pipeline.cmd_cross_eval(cfg, out, names[0], names[1], augmented)
    report = pipeline.cmd_report(out)
    print(f"[{time.perf_counter() - t0:6.1f}s] report: {Path(report) / 'report.md'}")


if __name__ == "__main__":
    main()
