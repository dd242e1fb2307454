"""Covariance-scaling sweep: certified bounds vs Monte Carlo truth per obstacle.

Writes one CSV row per (alpha, obstacle) with both bounds, the MC estimate
and the relative errors eps / eps_mc - 1.

    python scripts/sweep.py --samples 1000000 --out sweep.csv
"""
import argparse
import sys

import numpy as np

from riskcert.cli import SWEEP_COLUMNS, render, sweep_rows
from riskcert.scene import fixture_path, load_scene


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scene", default=str(fixture_path("arm_scene.json")))
    p.add_argument("--alphas", default=",".join(f"{a:.6g}" for a in np.geomspace(0.05, 20, 16)))
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    args = p.parse_args()
    alphas = [float(a) for a in args.alphas.split(",")]
    rows = sweep_rows(load_scene(args.scene), alphas, args.tol, args.samples, args.seed)
    text = render(SWEEP_COLUMNS, rows, as_csv=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
