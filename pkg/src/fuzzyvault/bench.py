"""Synthetic enrollment/verification experiments.

Each simulated user gets its own RNG derived from (seed, user index), so
single users can be re-run in isolation and results do not depend on the
order of evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attack import brute_force
from .synth import NoiseModel, SyntheticFinger, gen_population, sample_impression
from .vault import EnrollmentError, SystemParams, enroll_with_recapture
from .verifier import verify


@dataclass
class UserResult:
    index: int
    enrolled: bool
    genuine: bool = False
    impostor: bool = False
    correct: int = 0
    false: int = 0
    attack_trials: int | None = None
    attack_success: bool = False


@dataclass
class BenchSummary:
    users: list[UserResult] = field(default_factory=list)

    @property
    def enrolled(self) -> list[UserResult]:
        return [u for u in self.users if u.enrolled]

    @property
    def fte(self) -> float:
        return 1 - len(self.enrolled) / len(self.users) if self.users else 0.0

    @property
    def frr(self) -> float:
        e = self.enrolled
        return 1 - sum(u.genuine for u in e) / len(e) if e else 0.0

    @property
    def far(self) -> float:
        e = self.enrolled
        return sum(u.impostor for u in e) / len(e) if e else 0.0

    @property
    def mean_correct(self) -> float:
        e = self.enrolled
        return float(np.mean([u.correct for u in e])) if e else 0.0

    @property
    def mean_false(self) -> float:
        e = self.enrolled
        return float(np.mean([u.false for u in e])) if e else 0.0

    def as_table(self) -> str:
        rows = [("users", str(len(self.users))),
                ("FTE %", f"{100 * self.fte:.2f}"),
                ("FRR %", f"{100 * self.frr:.2f}"),
                ("impostor accept %", f"{100 * self.far:.2f}"),
                ("mean correct matches", f"{self.mean_correct:.2f}"),
                ("mean false matches", f"{self.mean_false:.2f}")]
        attacked = [u for u in self.enrolled if u.attack_trials is not None]
        if attacked:
            rows.append(("attack success %",
                         f"{100 * np.mean([u.attack_success for u in attacked]):.2f}"))
            rows.append(("mean attack trials", f"{np.mean([u.attack_trials for u in attacked]):.1f}"))
        w = max(len(a) for a, _ in rows)
        return "\n".join(f"{a:<{w}}  {b:>10}" for a, b in rows)


def _impressions(finger: SyntheticFinger, noise: NoiseModel, rng, params: SystemParams, n: int):
    return [sample_impression(finger, noise, rng, params.ellipse, render=params.prealign,
                              frame=params.frame).impression for _ in range(n)]


def simulate_user(index: int, params: SystemParams, noise: NoiseModel, seed: int,
                  per_finger_count: int = 30, impostor: bool = True,
                  attack_trials: int = 0, max_attempts: int = 3) -> UserResult:
    rng = np.random.default_rng([seed, index])
    owner, other = gen_population(2, params.f, per_finger_count, rng, params.ellipse)
    try:
        enrollment, _ = enroll_with_recapture(
            lambda theta, _attempt: _impressions(owner[theta - 1], noise, rng, params, params.u),
            params, rng, max_attempts)
    except EnrollmentError:
        return UserResult(index, False)
    vault = enrollment.vault
    queries = [_impressions(fg, noise, rng, params, 1)[0] for fg in owner]
    out = verify(vault, queries, params, rng)
    genuine_keys = {(m.theta, m.a, m.b) for m in enrollment.template}
    correct = sum(tuple(vault.rows[p - 1, :3].tolist()) in genuine_keys
                  for p in out.matched_positions)
    res = UserResult(index, True, out.success and out.recovered == enrollment.poly,
                     correct=correct, false=len(out.matched_positions) - correct)
    if impostor:
        fake = [_impressions(fg, noise, rng, params, 1)[0] for fg in other]
        res.impostor = verify(vault, fake, params, rng).success
    if attack_trials:
        run = brute_force(vault, vault.k, attack_trials, rng)
        res.attack_trials, res.attack_success = run.trials, run.success
    return res


def run_bench(params: SystemParams, noise: NoiseModel, n_users: int, seed: int = 0,
              per_finger_count: int = 30, impostor: bool = True, attack_trials: int = 0,
              max_attempts: int = 3) -> BenchSummary:
    return BenchSummary([simulate_user(i, params, noise, seed, per_finger_count, impostor,
                                       attack_trials, max_attempts) for i in range(n_users)])
