"""Verification: quality filtering, vault matching, rotation gating and
polynomial recovery checked against the stored commitment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field import (FieldPoly, commit_rows, interpolate_rows, rs_decode,
                    verify_commit)
from .matcher import match, rotation_gate
from .minutiae import Impression
from .prealign import align_points, prealign
from .vault import SystemParams, Vault


@dataclass
class FingerReport:
    theta: int
    n_matches: int
    phi: float | None
    gated: bool


@dataclass
class VerifyOutcome:
    success: bool
    recovered: FieldPoly | None = None
    per_finger: list[FingerReport] = field(default_factory=list)
    decode_trials: int = 0
    matched_positions: list[int] = field(default_factory=list)

    def __repr__(self) -> str:
        # keep the recovered key out of logs and tracebacks
        return (f"VerifyOutcome(success={self.success}, decode_trials={self.decode_trials}, "
                f"per_finger={self.per_finger})")


def quality_filter(query: Impression, Q: float) -> Impression:
    """Keep minutiae with quality >= Q; unrated minutiae survive only Q = 0."""
    if query.quality is None:
        return query if Q == 0 else query.subset(np.zeros(len(query), dtype=bool))
    return query.subset(query.quality >= Q)


def collect_matches(vault: Vault, queries: Sequence[Impression], params: SystemParams
                    ) -> tuple[list[tuple[int, int, int]], list[FingerReport]]:
    """Match each finger's query against that finger's vault points.

    Returns ``(I, reports)`` where I lists ``(position, E(position), y)`` for
    every matched vault point on fingers that pass the rotation gate.
    """
    if len(queries) != vault.f:
        raise ValueError(f"need one query per finger ({vault.f})")
    found: list[tuple[int, int, int]] = []
    reports = []
    for theta, query in enumerate(queries, start=1):
        positions, pts = vault.finger(theta)
        if params.prealign and query.image is not None:
            query = Impression(align_points(query.points, prealign(query.image),
                                            params.frame_center), query.quality)
        query = quality_filter(query, params.Q)
        m = match(pts, query.points, params.delta_v, params.eps, params.omega, params.S,
                  params.center)
        ok = rotation_gate(m, params.rho)
        phi = None if m.isometry is None else m.isometry.phi
        reports.append(FingerReport(theta, m.n_pairs, phi, not ok))
        if not ok:
            continue
        for ref_idx, _ in m.pairs:
            pos = int(positions[ref_idx])
            found.append((pos, vault.x_of(pos), int(vault.rows[pos - 1, 3])))
    found.sort()
    return found, reports


def subset_size(n_found: int, k: int, expected_correct: float | None) -> int:
    if expected_correct is None:
        return min(n_found, k)
    return min(n_found, max(k, int(round(2 * expected_correct - k))))


def recover(found: Sequence[tuple[int, int]], k: int, q: int, commitment: bytes,
            rng: np.random.Generator, budget: int = 100_000,
            expected_correct: float | None = None, batch: int = 4096) -> VerifyOutcome:
    """Two-stage recovery from (x, y) pairs.

    Stage 1 decodes all pairs at once.  Stage 2 draws up to ``budget``
    random subsets of size w (see :func:`subset_size`) and decodes each.
    Every candidate must reproduce ``commitment``.
    """
    pts = [(int(x), int(y)) for x, y in found]
    if len(pts) < k:
        return VerifyOutcome(False)
    cand = rs_decode(pts, k, q)
    trials = 1
    if cand is not None and verify_commit(cand, commitment):
        return VerifyOutcome(True, cand, decode_trials=trials)
    w = subset_size(len(pts), k, expected_correct)
    if w >= len(pts) or budget <= 0:
        return VerifyOutcome(False, decode_trials=trials)

    xs = np.array([p[0] for p in pts], dtype=np.int64)
    ys = np.array([p[1] for p in pts], dtype=np.int64)
    done = 0
    if w == k and q < 2**31:
        while done < budget:
            n = min(batch, budget - done)
            pick = np.argsort(rng.random((n, len(pts))), axis=1)[:, :k]
            coeffs = interpolate_rows(xs[pick], ys[pick], q)
            for i, digest in enumerate(commit_rows(coeffs, q)):
                if digest == commitment:
                    poly = FieldPoly(tuple(int(c) for c in coeffs[i]), q)
                    return VerifyOutcome(True, poly, decode_trials=trials + done + i + 1)
            done += n
        return VerifyOutcome(False, decode_trials=trials + done)

    for done in range(1, budget + 1):
        pick = rng.choice(len(pts), size=w, replace=False)
        cand = rs_decode([pts[i] for i in pick], k, q)
        if cand is not None and verify_commit(cand, commitment):
            return VerifyOutcome(True, cand, decode_trials=trials + done)
    return VerifyOutcome(False, decode_trials=trials + budget)


def verify(vault: Vault, queries: Sequence[Impression], params: SystemParams,
           rng: np.random.Generator) -> VerifyOutcome:
    found, reports = collect_matches(vault, queries, params)
    out = recover([(x, y) for _, x, y in found], vault.k, vault.q, vault.commitment, rng,
                  params.budget, params.expected_correct)
    out.per_finger = reports
    out.matched_positions = [pos for pos, _, _ in found]
    return out
