"""Brute-force trial counts on small vaults against C(r,k)/C(t,k)."""
import argparse
import math

import numpy as np

from fuzzyvault.attack import brute_force
from fuzzyvault.minutiae import Minutia
from fuzzyvault.synth import place_points
from fuzzyvault.vault import SystemParams, enroll_template


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--t", type=int, default=10)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--r", type=int, nargs="+", default=[15, 20, 30, 40])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for r in args.r:
        params = SystemParams(f=2, t=args.t, r=r, k=args.k, chi=1)
        trials = []
        for i in range(args.runs):
            rng = np.random.default_rng([args.seed, r, i])
            pts = place_points(args.t, params.ellipse, params.d, rng)
            template = [Minutia(1 + j % 2, int(a), int(b)) for j, (a, b) in enumerate(pts)]
            vault = enroll_template(template, params, rng).vault
            trials.append(brute_force(vault, args.k, 10**7, rng).trials)
        want = math.comb(r, args.k) / math.comb(args.t, args.k)
        print(f"r={r:3d} mean trials {np.mean(trials):10.1f}  expected {want:10.1f}  "
              f"ratio {np.mean(trials) / want:5.2f}")


if __name__ == "__main__":
    main()
