"""Print the loss tables for the quadratic, noisy quadratic and 2-D
Rosenbrock benchmarks (1000 iterations each).

    python scripts/reproduce_tables.py [--out out/tables]
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from savopt.harness.config import NoiseConfig, load_config
from savopt.harness.runner import compare

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", default=None, help="also write traces and plots here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    jobs = [("quadratic", load_config(CONFIGS / "quadratic_table.yaml"))]
    noisy = load_config(CONFIGS / "quadratic_noisy.yaml")
    for eps in (0.01, 0.05, 0.1):
        jobs.append((f"noisy quadratic, eps={eps}",
                     replace(noisy, noise=NoiseConfig(eps, noisy.noise.seed))))
    jobs.append(("rosenbrock 2-D", load_config(CONFIGS / "rosenbrock2d_table.yaml")))

    for title, cfg in jobs:
        out = Path(args.out) / title.replace(" ", "_").replace(",", "") if args.out else None
        cfg.compare.out_dir = str(out) if out else None
        _, table = compare(cfg, write=out is not None)
        print(f"\n{title}\n{table}")


if __name__ == "__main__":
    main()
