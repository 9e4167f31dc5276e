"""Adaptive RSAV on n-D Rosenbrock from the origin for n = 10, 100, 1000.

Prints the loss at iteration 1000 and the first iteration with loss < 1e-2,
for a range of shifts C (the C = 1e-8 row is the package default).

    python scripts/rosenbrock_dimensions.py
"""

import argparse
import logging

import numpy as np

from savopt.harness.config import parse_config
from savopt.harness.runner import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--iterations", type=int, default=5000)
    ap.add_argument("--C", type=float, nargs="+", default=[1e-8, 1e-6, 1e-4, 1e-2, 1.0])
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)
    print("C         n     f@1000     first f<1e-2")
    for C in args.C:
        for n in (10, 100, 1000):
            cfg = parse_config({
                "problem": {"name": "rosenbrock", "dimension": n, "init": "zeros"},
                "optimizer": {"name": "adaptive_rsav", "lr": 1.0, "params": {"C": C}},
                "iterations": args.iterations})
            f = np.array([r.f for r in run_experiment(cfg, write=False).trace])
            hit = np.flatnonzero(f < 1e-2)
            first = str(hit[0]) if hit.size else "-"
            print(f"{C:<8.0e} {n:>5}  {f[min(1000, f.size - 1)]:9.3g}  {first:>8}", flush=True)


if __name__ == "__main__":
    main()
