"""Attack cost of the reference parameter rows, base-2 and natural-log readings,
plus the nearest rows found by the parameter search."""
import argparse
import math

from fuzzyvault.security import attack_cost_bits, param_search

ROWS = [  # f, u, t, r, k, printed security
    (2, 2, 62, 240, 27, 68),
    (3, 3, 90, 202, 45, 69),
    (3, 3, 90, 351, 41, 97),
    (3, 3, 70, 360, 34, 97),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--search", action="store_true", help="also run the parameter search")
    args = ap.parse_args()
    print(f"{'f':>2} {'t':>4} {'r':>4} {'k':>3} {'printed':>7} {'log2':>7} {'ln':>7}")
    for f, u, t, r, k, printed in ROWS:
        b2 = attack_cost_bits(t, r, k, 9, f)
        be = attack_cost_bits(t, r, k, 9, f, log_base=math.e)
        print(f"{f:2d} {t:4d} {r:4d} {k:3d} {printed:7d} {b2:7.2f} {be:7.2f}")
    if args.search:
        for f, u, t, r, k, printed in ROWS:
            rows = param_search(f, u, printed)
            best = min(rows, key=lambda x: abs(x.t - t) / 4 + abs(x.r - r) / 20 + abs(x.k - k) / 3)
            print(f"target {printed} (f={f}, u={u}): closest row t={best.t} r={best.r} "
                  f"k={best.k} chi={best.chi} delta_e={best.delta_e:g} delta_v={best.delta_v:g} "
                  f"bits={best.bits:.2f} of {len(rows)} rows")


if __name__ == "__main__":
    main()
