"""Command-line entry point: ``fuzzyvault <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 usage or format error,
3 failure to enroll or infeasible request.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .attack import Infeasible, append_log, brute_force
from .bench import run_bench
from .config import MalformedConfig, load_config
from .matcher import match
from .minutiae import Impression, read_query
from .prealign import read_pgm, write_pgm
from .security import NoFeasibleParams, ReferenceTables, param_search, security_report
from .synth import dump_user, gen_population, sample_impression, write_impression
from .vault import EnrollmentError, MalformedVault, Vault, enroll_with_recapture
from .verifier import verify

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load_impression(path: str) -> Impression:
    imp = read_query(path)
    pgm = Path(path).with_suffix(".pgm")
    if pgm.exists():
        imp.image = read_pgm(pgm)
    return imp


def _mu(cfg) -> float:
    if cfg.experiment.mu is not None:
        return cfg.experiment.mu
    p = cfg.params
    key = (p.u, float(p.delta_v))
    table = ReferenceTables.load().match_rate
    if key not in table:
        raise UsageError(f"no tabulated match rate for u={p.u}, delta_v={p.delta_v}; set mu")
    return table[key]


def cmd_gen(args, cfg) -> int:
    """Synthetic users: truth file, u enrollment captures and one query per finger."""
    out = Path(args.out or "population")
    out.mkdir(parents=True, exist_ok=True)
    p, ex = cfg.params, cfg.experiment
    rng = np.random.default_rng(args.seed)
    users = gen_population(ex.n_users, p.f, ex.per_finger_count, rng, p.ellipse)
    for i, user in enumerate(users):
        stem = out / f"user_{i:04d}"
        dump_user(user, stem.with_suffix(".txt"))
        for finger in user:
            names = [f"e{j}" for j in range(1, p.u + 1)] + ["q"]
            for name in names:
                s = sample_impression(finger, cfg.noise, rng, p.ellipse, render=p.prealign,
                                      frame=p.frame)
                path = Path(f"{stem}_f{finger.theta}_{name}.txt")
                write_impression(s, path)
                if s.impression.image is not None:
                    write_pgm(s.impression.image, path.with_suffix(".pgm"))
    print(f"wrote {len(users)} users to {out}")
    return EXIT_OK


def cmd_enroll(args, cfg) -> int:
    p = cfg.params
    if len(args.impressions) != p.f * p.u:
        raise UsageError(f"expected f*u = {p.f * p.u} impression files, finger by finger")
    imps = [_load_impression(x) for x in args.impressions]
    grouped = [imps[i * p.u:(i + 1) * p.u] for i in range(p.f)]
    rng = np.random.default_rng(args.seed)
    # files are the only captures available, so every attempt sees the same ones
    enrollment, _ = enroll_with_recapture(lambda theta, _a: grouped[theta - 1], p, rng, 1)
    out = args.out or "vault.txt"
    enrollment.vault.save(out)
    print(f"enrolled: r={enrollment.vault.r} k={enrollment.vault.k} -> {out}")
    if args.reveal_key:
        print("key=" + ",".join(str(c) for c in enrollment.poly.coeffs))
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    vault = Vault.load(_need(args.vault, "--vault"))
    if len(args.queries) != vault.f:
        raise UsageError(f"expected {vault.f} query files, one per finger")
    queries = [_load_impression(x) for x in args.queries]
    out = verify(vault, queries, cfg.params, np.random.default_rng(args.seed))
    for rep in out.per_finger:
        phi = "-" if rep.phi is None else f"{rep.phi:.2f}"
        print(f"finger {rep.theta}: matches={rep.n_matches} phi={phi} gated={int(rep.gated)}")
    if not out.success:
        print("Verification failed")
        return EXIT_REJECT
    print("Verification successful")
    if args.reveal_key:
        print("key=" + ",".join(str(c) for c in out.recovered.coeffs))
    return EXIT_OK


def cmd_match(args, cfg) -> int:
    p = cfg.params
    ref, query = read_query(args.reference), read_query(args.query)
    m = match(ref.points, query.points, p.delta_v, p.eps, p.omega, p.S, p.center)
    if m.isometry is None:
        print("no candidate isometry")
        return EXIT_REJECT
    iso = m.isometry
    print(f"phi={iso.phi:.3f} v={iso.v[0]:.2f},{iso.v[1]:.2f} pairs={m.n_pairs}")
    for i, j in m.pairs:
        print(f"{i} {j}")
    return EXIT_OK


def cmd_attack(args, cfg) -> int:
    vault = Vault.load(_need(args.vault, "--vault"))
    rng = np.random.default_rng(args.seed)
    run = brute_force(vault, vault.k, args.trials, rng, seed=args.seed)
    print(run.log_line())
    if args.out:
        append_log(args.out, [run])
    if run.success and args.reveal_key:
        print("key=" + ",".join(str(c) for c in run.recovered.coeffs))
    return EXIT_OK if run.success else EXIT_REJECT


def cmd_security(args, cfg) -> int:
    p = cfg.params
    rep = security_report(p.f, p.t, p.r, p.k, p.chi, p.d, p.delta_v, _mu(cfg),
                          cfg.experiment.tau, p.ellipse, cfg.experiment.log_base)
    print("\n".join(rep.as_lines()) if args.format == "kv" else rep.as_table())
    return EXIT_OK


def cmd_params(args, cfg) -> int:
    p, ex = cfg.params, cfg.experiment
    target = ex.target_bits if args.target is None else args.target
    rows = param_search(p.f, p.u, target, tau=ex.tau, Q=p.Q, ellipse=p.ellipse,
                        log_base=ex.log_base)
    print(f"{'bits':>7} {'delta_e':>7} {'delta_v':>7} {'t':>4} {'r':>4} {'k':>3} "
          f"{'chi':>3} {'d':>3} {'Q':>4} {'m_c':>6} {'m_f':>6}")
    for row in rows[:args.top]:
        print(f"{row.bits:7.2f} {row.delta_e:7g} {row.delta_v:7g} {row.t:4d} {row.r:4d} "
              f"{row.k:3d} {row.chi:3d} {row.d:3d} {row.Q:4g} {row.m_c:6.2f} {row.m_f:6.2f}")
    print(f"{len(rows)} Pareto-optimal rows")
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    ex = cfg.experiment
    summary = run_bench(cfg.params, cfg.noise, args.users or ex.n_users, args.seed,
                        ex.per_finger_count, attack_trials=args.trials or 0,
                        max_attempts=ex.recapture)
    print(f"seed={args.seed}")
    print(summary.as_table())
    if args.out:
        lines = [f"user={u.index} enrolled={int(u.enrolled)} genuine={int(u.genuine)} "
                 f"impostor={int(u.impostor)} correct={u.correct} false={u.false}"
                 for u in summary.users]
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _need(value, flag):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    ap = argparse.ArgumentParser(prog="fuzzyvault", description="Multi-finger fuzzy vault toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", parents=[common], help="generate a synthetic population")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("enroll", parents=[common], help="build a vault from impressions")
    s.add_argument("impressions", nargs="+", help="u files per finger, finger by finger")
    s.add_argument("--out", help="vault file to write")
    s.add_argument("--reveal-key", action="store_true")
    s.set_defaults(func=cmd_enroll)

    s = sub.add_parser("verify", parents=[common], help="open a vault with one query per finger")
    s.add_argument("queries", nargs="+")
    s.add_argument("--vault")
    s.add_argument("--reveal-key", action="store_true")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("match", parents=[common], help="align two point files")
    s.add_argument("reference")
    s.add_argument("query")
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("attack", parents=[common], help="brute-force a vault")
    s.add_argument("--vault")
    s.add_argument("--trials", type=int, default=1_000_000)
    s.add_argument("--out", help="experiment log to append to")
    s.add_argument("--reveal-key", action="store_true")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("security", parents=[common], help="security report for the config")
    s.add_argument("--format", choices=("table", "kv"), default="table")
    s.set_defaults(func=cmd_security)

    s = sub.add_parser("params", parents=[common], help="search parameter sets")
    s.add_argument("--target", type=float, help="security target in bits")
    s.add_argument("--top", type=int, default=20)
    s.set_defaults(func=cmd_params)

    s = sub.add_parser("bench", parents=[common], help="FTE/FRR/impostor experiment")
    s.add_argument("--users", type=int)
    s.add_argument("--trials", type=int, help="brute-force budget per vault (0 = skip)")
    s.add_argument("--out", help="per-user results file")
    s.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (EnrollmentError, NoFeasibleParams, Infeasible) as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MalformedConfig, MalformedVault, UsageError, ValueError, OSError) as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
