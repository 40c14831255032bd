"""Run every experiment at one scale and write reports under an output directory.

    python3 scripts/run_all.py --scale smoke --seed 1 --out runs/
"""

import argparse
import os
import sys
import time

from stablegraph.experiments import EXPERIMENTS, default_config, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", choices=("smoke", "paper"), default="smoke")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("only", nargs="*", help="subset of experiments")
    args = ap.parse_args()
    failed = []
    for name in args.only or EXPERIMENTS:
        cfg = default_config(name, args.scale, args.seed)
        cfg.out = os.path.join(args.out, name)
        cfg.workers = args.workers
        start = time.perf_counter()
        rep = run(cfg)
        status = "ok" if rep.passed else "FAILED ROWS"
        print(f"{name:12s} {time.perf_counter() - start:7.1f}s  {status}")
        for row in rep.rows:
            if row.passed is False:
                print("    " + row.line())
        if not rep.passed:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
