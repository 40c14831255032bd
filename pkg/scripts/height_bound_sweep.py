"""Sweep the coupled height bound over many small explorations.

    python3 scripts/height_bound_sweep.py --runs 1500
"""

import argparse

import numpy as np

from stablegraph.config_explorer import coupled_height_check, explore
from stablegraph.degree_model import finite_law, make_critical_power_law, sample_degrees


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    laws = {"nu13": finite_law({1: 0.75, 3: 0.25}), "power1.5": make_critical_power_law(1.5)}
    for name, law in laws.items():
        rng = np.random.default_rng(args.seed)
        windows = violations = 0
        by_b = {}
        for n in (20, 50, 100, 200):
            for _ in range(args.runs):
                for a, m, b, gap, bound in coupled_height_check(explore(sample_degrees(law, n, rng), rng)):
                    windows += 1
                    violations += gap > bound
                    by_b[int(b)] = max(by_b.get(int(b), 0), int(gap))
        print(f"{name}: {windows} windows, {violations} violations, "
              f"largest gap by back-edge count {dict(sorted(by_b.items()))}")


if __name__ == "__main__":
    main()
