"""Brute-force key recovery against a stored vault.

The attacker draws random k-subsets of vault positions, interpolates the
polynomial through them and checks the result against the commitment.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import FieldPoly, commit_rows, interpolate_rows, lagrange_interpolate, verify_commit
from .security import attack_cost_bits, brute_force_trials_log2, zeta
from .vault import Vault

MAX_DESK_BITS = 40.0
# interpolation cost 6.5 k log^2 k times a constant factor of 18
OPS_PER_TRIAL_FACTOR = 6.5 * 18


class Infeasible(RuntimeError):
    pass


@dataclass
class AttackRun:
    trials: int
    success: bool
    recovered: FieldPoly | None
    elapsed: float
    seed: int | None = None

    def log_line(self) -> str:
        return (f"seed={self.seed} trials={self.trials} success={int(self.success)} "
                f"elapsed={self.elapsed:.4f}")


def _random_subsets(n: int, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return np.argsort(rng.random((count, n)), axis=1)[:, :k]


def brute_force(vault: Vault, k: int, max_trials: int, rng: np.random.Generator,
                seed: int | None = None, batch: int = 4096) -> AttackRun:
    """Draw uniform k-subsets of positions until one reproduces the commitment."""
    if k != vault.k:
        raise ValueError(f"k={k} does not match the vault (k={vault.k})")
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    start = time.perf_counter()
    q = vault.q
    xs = np.arange(1, vault.r + 1, dtype=np.int64) % q
    ys = vault.rows[:, 3].astype(np.int64)
    done = 0
    size = 64
    while done < max_trials:
        n = min(size, batch, max_trials - done)
        pick = _random_subsets(vault.r, k, n, rng)
        if q < 2**31:
            coeffs = interpolate_rows(xs[pick], ys[pick], q)
            digests = commit_rows(coeffs, q)
            for i, digest in enumerate(digests):
                if digest == vault.commitment:
                    poly = FieldPoly(tuple(int(c) for c in coeffs[i]), q)
                    return AttackRun(done + i + 1, True, poly, time.perf_counter() - start, seed)
        else:
            for i, row in enumerate(pick):
                poly = lagrange_interpolate([(int(xs[j]), int(ys[j])) for j in row], k, q)
                if verify_commit(poly, vault.commitment):
                    return AttackRun(done + i + 1, True, poly, time.perf_counter() - start, seed)
        done += n
        size *= 2
    return AttackRun(done, False, None, time.perf_counter() - start, seed)


def ops_per_trial(k: int) -> float:
    return OPS_PER_TRIAL_FACTOR * k * math.log2(k) ** 2


@dataclass
class AttackComparison:
    trials: int
    measured_trials_log2: float
    measured_ops_log2: float
    expected_trials_log2: float
    predicted_bits: float

    def as_lines(self) -> list[str]:
        return [f"trials={self.trials}",
                f"measured_trials_log2={self.measured_trials_log2:.3f}",
                f"measured_ops_log2={self.measured_ops_log2:.3f}",
                f"expected_trials_log2={self.expected_trials_log2:.3f}",
                f"predicted_bits={self.predicted_bits:.3f}"]


def attack_cost_measured_vs_predicted(vault: Vault, t: int, chi: int, rng: np.random.Generator,
                                      max_bits: float = MAX_DESK_BITS) -> AttackComparison:
    """Run :func:`brute_force` to completion and set its cost beside the
    analytic attack-cost estimate.

    ``t`` is the number of genuine points (it is not stored in the vault).
    """
    r, k, f = vault.r, vault.k, vault.f
    if r == t:
        predicted = 0.0
        expected = 0.0
    else:
        expected = brute_force_trials_log2(t, r, k)
        predicted = attack_cost_bits(t, r, k, chi, f) if k >= 2 else expected
        if zeta(t, chi, f) == 0:
            predicted = expected
    if max(predicted, expected) > max_bits:
        raise Infeasible(f"predicted cost {max(predicted, expected):.1f} bits exceeds {max_bits}")
    run = brute_force(vault, k, 2**62, rng)
    measured = math.log2(run.trials)
    ops = measured + (math.log2(ops_per_trial(k)) if k >= 2 and r > t else 0.0)
    return AttackComparison(run.trials, measured, ops if r > t else 0.0, expected, predicted)


def append_log(path, runs) -> None:
    """Append one line per run to a plain-text experiment log."""
    with Path(path).open("a") as fh:
        for run in runs:
            fh.write(run.log_line() + "\n")
