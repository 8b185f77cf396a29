"""Largest index found on pure Gaussian data, to calibrate the stopping floor.

    python scripts/null_calibration.py --p 10 --n 10000 --seeds 10
"""
import argparse

import numpy as np

from wpursuit.datagen import make_planted_model, sample, whiten
from wpursuit.pursuit import Frame, OptimizerConfig, maximize_on_sphere


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=10)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=None)
    args = ap.parse_args()

    model = make_planted_model(args.p, None, 0)
    restarts = args.restarts or max(16, 2 * args.p)
    maxima = []
    for s in range(args.seeds):
        data = whiten(sample(model, args.n, s))
        _, value = maximize_on_sphere(data, Frame.empty(args.p),
                                      OptimizerConfig(restarts=restarts, seed=s),
                                      screen_iters=20, screen_keep=4)
        maxima.append(value)
        print(f"seed {s:3d}  max index {value:.4f}")
    print(f"p={args.p} n={args.n}: mean {np.mean(maxima):.4f}, max {np.max(maxima):.4f}")


if __name__ == "__main__":
    main()
