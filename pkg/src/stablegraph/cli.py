"""Command line entry point: ``stablegraph <experiment> [--config F] [--seed S] [--scale smoke|paper] [--out DIR]``."""

from __future__ import annotations

import argparse
import sys

from .experiments import (EXPERIMENTS, BudgetError, ConfigError, ExperimentConfig, MatchingError,
                          PreconditionError, default_config, run)
from .degree_model import LawError


def build_parser():
    parser = argparse.ArgumentParser(prog="stablegraph",
                                     description="Critical configuration graph experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--scale", choices=("smoke", "paper"), default="smoke")
        p.add_argument("--out", help="output directory for report.csv and tables")
        p.add_argument("--workers", type=int, help="worker processes for replicas")
    return parser


def make_config(args):
    cfg = default_config(args.experiment, args.scale)
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_text(fh.read(), base=cfg)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"config names experiment {cfg.experiment!r}, "
                              f"command is {args.experiment!r}")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    if args.workers:
        cfg.workers = args.workers
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        report = run(cfg)
    except (ConfigError, PreconditionError, LawError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MatchingError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(report.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
