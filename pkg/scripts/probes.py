"""Concentration sweep, convergence rate and covariance-norm probes in one pass.

    python scripts/probes.py --seeds 10
"""
import argparse
import statistics

import numpy as np

from wpursuit.datagen import SignalLaw, make_planted_model
from wpursuit.metrics import concentration_probe, rate_probe, sample_cov_spectral_norm
from wpursuit.pursuit import DataMatrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--p", type=int, default=10)
    ap.add_argument("--signal-k", type=int, default=0, help="two_point signal dimension, 0 for null")
    args = ap.parse_args()

    law = SignalLaw.two_point(args.signal_k) if args.signal_k else None
    model = make_planted_model(args.p, law, 0, mc_samples=1 << 18)
    print("concentration: n, median max-gap over seeds")
    for n in (100, 1000, 10_000):
        gaps = [concentration_probe(model, n, 200, 1 << 18, seed=s).max_abs_deviation
                for s in range(args.seeds)]
        print(f"  {n:6d}  {statistics.median(gaps):.4f}")

    for name, l in [("standard normal", SignalLaw.standard_normal()),
                    ("uniform", SignalLaw.uniform(1)), ("two-point", SignalLaw.two_point(1))]:
        res = rate_probe(l, [100, 1000, 10_000], 50, seed=0)
        pts = ", ".join(f"{n}:{v:.4f}" for n, v in res.points)
        print(f"rate ({name}): slope {res.slope:.3f}  [{pts}]")

    rng = np.random.default_rng(0)
    for n, p in [(4000, 400), (2000, 20), (1000, 500)]:
        v = sample_cov_spectral_norm(DataMatrix(rng.standard_normal((n, p))))
        print(f"covnorm n={n} p={p}: {v:.4f} (edge {(1 + (p / n) ** 0.5) ** 2:.4f})")


if __name__ == "__main__":
    main()
