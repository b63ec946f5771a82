"""Synthetic FTE / FRR / impostor-accept sweep over noise levels."""
import argparse

from fuzzyvault.bench import run_bench
from fuzzyvault.synth import NoiseModel
from fuzzyvault.vault import SystemParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--users", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jitter", type=float, nargs="+", default=[0, 2, 3, 4])
    args = ap.parse_args()
    params = SystemParams(f=2, t=20, r=80, k=8, delta_e=10, delta_v=7, chi=5, Q=0.3)
    print(f"{'jitter':>6} {'FTE%':>6} {'FRR%':>6} {'FAR%':>6} {'m_c':>6} {'m_f':>6}")
    for jitter in args.jitter:
        noise = NoiseModel(jitter_radius=jitter, p_delete=0.1, n_spurious=10, global_rot=10,
                           global_trans=10)
        s = run_bench(params, noise, args.users, args.seed)
        print(f"{jitter:6g} {100 * s.fte:6.1f} {100 * s.frr:6.1f} {100 * s.far:6.1f} "
              f"{s.mean_correct:6.2f} {s.mean_false:6.2f}")


if __name__ == "__main__":
    main()
