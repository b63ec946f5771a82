"""Two-pair isometry search for minutiae correspondences.

Every pair of reference points is tried against every ordered pair of query
points with a compatible inter-point distance.  Each such seed defines a
rotation plus translation mapping the query into the reference frame; the
one producing the most correspondences within ``delta`` wins.

Rotations are taken about a fixed pivot (the frame centre by default) so
that the translation limit ``S`` measures a real displacement rather than
the lever arm of a rotation about the pixel origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

EPS = 0.2
OMEGA = 45.0
S_MAX = 200.0
RHO = 8.0


@dataclass(frozen=True)
class Isometry:
    """Rotation by ``phi`` degrees about ``center`` followed by translation ``v``."""

    phi: float
    v: tuple[float, float]
    center: tuple[float, float] = (256.0, 256.0)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        t = math.radians(self.phi)
        c, s = math.cos(t), math.sin(t)
        rel = pts - self.center
        out = np.empty_like(rel)
        out[:, 0] = c * rel[:, 0] - s * rel[:, 1]
        out[:, 1] = s * rel[:, 0] + c * rel[:, 1]
        return out + self.center + self.v

    @property
    def shift(self) -> float:
        return math.hypot(*self.v)


@dataclass
class MatchResult:
    isometry: Isometry | None
    pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


# -- numba kernels ------------------------------------------------------------

@njit(cache=True)
def _build_grid(ref, cell, x0, y0, nx, ny):
    ncell = nx * ny
    counts = np.zeros(ncell + 1, dtype=np.int64)
    ids = np.empty(ref.shape[0], dtype=np.int64)
    for i in range(ref.shape[0]):
        gx = int((ref[i, 0] - x0) / cell)
        gy = int((ref[i, 1] - y0) / cell)
        ids[i] = gx * ny + gy
        counts[ids[i] + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    items = np.empty(ref.shape[0], dtype=np.int64)
    fill = counts[:-1].copy()
    for i in range(ref.shape[0]):
        items[fill[ids[i]]] = i
        fill[ids[i]] += 1
    return counts, items


@njit(cache=True)
def _build_raster(ref, delta, x0, y0, w, h):
    # pixel flagged when some reference point lies within delta + sqrt(2)/2
    # of its centre: a conservative prefilter for rounded query positions
    ras = np.zeros((w, h), dtype=np.bool_)
    rad = delta + 0.7072
    r2 = rad * rad
    k = int(math.ceil(rad))
    for i in range(ref.shape[0]):
        bx = int(round(ref[i, 0] - x0))
        by = int(round(ref[i, 1] - y0))
        for X in range(bx - k - 1, bx + k + 2):
            if X < 0 or X >= w:
                continue
            dx = X + x0 - ref[i, 0]
            for Y in range(by - k - 1, by + k + 2):
                if Y < 0 or Y >= h:
                    continue
                dy = Y + y0 - ref[i, 1]
                if dx * dx + dy * dy < r2:
                    ras[X, Y] = True
    return ras


@njit(cache=True)
def _score(ref, tq, delta2, cell, x0, y0, nx, ny, starts, items, ras, rx0, ry0,
           best, buf_d, buf_r, buf_q, used_r, used_q, out_pairs):
    """Greedy closest-first correspondences; returns count, fills out_pairs.

    Returns early (with a count below ``best``) once ``best`` is out of reach.
    """
    m = 0
    hits = 0
    nq = tq.shape[0]
    w = ras.shape[0]
    h = ras.shape[1]
    for qi in range(nq):
        if hits + (nq - qi) < best:
            return hits
        px = tq[qi, 0]
        py = tq[qi, 1]
        X = int(math.floor(px - rx0 + 0.5))
        Y = int(math.floor(py - ry0 + 0.5))
        if X < 0 or Y < 0 or X >= w or Y >= h or not ras[X, Y]:
            continue
        before = m
        fx = (px - x0) / cell
        fy = (py - y0) / cell
        if fx < -1.0 or fy < -1.0 or fx > nx or fy > ny:
            continue
        gx = int(math.floor(fx))
        gy = int(math.floor(fy))
        for ax in range(gx - 1, gx + 2):
            if ax < 0 or ax >= nx:
                continue
            for ay in range(gy - 1, gy + 2):
                if ay < 0 or ay >= ny:
                    continue
                c = ax * ny + ay
                for s in range(starts[c], starts[c + 1]):
                    ri = items[s]
                    dx = ref[ri, 0] - px
                    dy = ref[ri, 1] - py
                    d2 = dx * dx + dy * dy
                    if d2 < delta2:
                        buf_d[m] = d2
                        buf_r[m] = ri
                        buf_q[m] = qi
                        m += 1
        if m > before:
            hits += 1
    if m == 0:
        return 0
    order = np.argsort(buf_d[:m], kind="mergesort")
    for i in range(ref.shape[0]):
        used_r[i] = False
    for i in range(tq.shape[0]):
        used_q[i] = False
    n = 0
    for o in order:
        r = buf_r[o]
        q = buf_q[o]
        if used_r[r] or used_q[q]:
            continue
        used_r[r] = True
        used_q[q] = True
        out_pairs[n, 0] = r
        out_pairs[n, 1] = q
        n += 1
    return n


@njit(cache=True)
def _transform(qry, phi, vx, vy, cx, cy, out):
    c = math.cos(phi)
    s = math.sin(phi)
    for i in range(qry.shape[0]):
        rx = qry[i, 0] - cx
        ry = qry[i, 1] - cy
        out[i, 0] = c * rx - s * ry + cx + vx
        out[i, 1] = s * rx + c * ry + cy + vy


@njit(cache=True)
def _search(ref, qry, delta, eps, omega, smax, cx, cy):
    n = ref.shape[0]
    nq = qry.shape[0]
    cell = delta
    x0 = ref[:, 0].min() - cell
    y0 = ref[:, 1].min() - cell
    nx = int((ref[:, 0].max() - x0) / cell) + 2
    ny = int((ref[:, 1].max() - y0) / cell) + 2
    starts, items = _build_grid(ref, cell, x0, y0, nx, ny)
    rx0 = math.floor(ref[:, 0].min() - delta - 2.0)
    ry0 = math.floor(ref[:, 1].min() - delta - 2.0)
    ras = _build_raster(ref, delta, rx0, ry0,
                        int(ref[:, 0].max() - rx0 + delta + 4.0),
                        int(ref[:, 1].max() - ry0 + delta + 4.0))

    # ordered query pairs sorted by length
    npq = nq * (nq - 1)
    qd = np.empty(npq)
    qa = np.empty(npq)
    qi_ = np.empty(npq, dtype=np.int64)
    m = 0
    for i in range(nq):
        for j in range(nq):
            if i == j:
                continue
            dx = qry[j, 0] - qry[i, 0]
            dy = qry[j, 1] - qry[i, 1]
            qd[m] = math.sqrt(dx * dx + dy * dy)
            qa[m] = math.atan2(dy, dx)
            qi_[m] = i
            m += 1
    order = np.argsort(qd, kind="mergesort")
    qd = qd[order]
    qa = qa[order]
    qi_ = qi_[order]

    nbuf = n * nq
    buf_d = np.empty(nbuf)
    buf_r = np.empty(nbuf, dtype=np.int64)
    buf_q = np.empty(nbuf, dtype=np.int64)
    used_r = np.zeros(n, dtype=np.bool_)
    used_q = np.zeros(nq, dtype=np.bool_)
    pairs = np.empty((min(n, nq), 2), dtype=np.int64)
    tq = np.empty((nq, 2))
    delta2 = delta * delta

    best = -1
    best_phi = 0.0
    best_vx = 0.0
    best_vy = 0.0
    best_aphi = 0.0
    best_sh = 0.0
    two_pi = 2.0 * math.pi
    for i in range(n):
        for j in range(i + 1, n):
            dx = ref[j, 0] - ref[i, 0]
            dy = ref[j, 1] - ref[i, 1]
            D = math.sqrt(dx * dx + dy * dy)
            ang = math.atan2(dy, dx)
            lo = np.searchsorted(qd, D - eps * D, side="left")
            hi = np.searchsorted(qd, D + eps * D, side="right")
            for s in range(lo, hi):
                phi = ang - qa[s]
                if phi > math.pi:
                    phi -= two_pi
                elif phi <= -math.pi:
                    phi += two_pi
                aphi = abs(phi)
                if aphi >= omega:
                    continue
                c = math.cos(phi)
                sn = math.sin(phi)
                a = qi_[s]
                rx = qry[a, 0] - cx
                ry = qry[a, 1] - cy
                vx = ref[i, 0] - cx - (c * rx - sn * ry)
                vy = ref[i, 1] - cy - (sn * rx + c * ry)
                sh = math.sqrt(vx * vx + vy * vy)
                if sh >= smax:
                    continue
                _transform(qry, phi, vx, vy, cx, cy, tq)
                cnt = _score(ref, tq, delta2, cell, x0, y0, nx, ny, starts, items,
                             ras, rx0, ry0, best, buf_d, buf_r, buf_q, used_r, used_q,
                             pairs)
                better = cnt > best
                if not better and cnt == best:
                    if aphi < best_aphi or (aphi == best_aphi and sh < best_sh):
                        better = True
                if better:
                    best = cnt
                    best_phi = phi
                    best_vx = vx
                    best_vy = vy
                    best_aphi = aphi
                    best_sh = sh
    return best, best_phi, best_vx, best_vy


@njit(cache=True)
def _pairs_for(ref, qry, delta, phi, vx, vy, cx, cy):
    n = ref.shape[0]
    nq = qry.shape[0]
    cell = delta
    x0 = ref[:, 0].min() - cell
    y0 = ref[:, 1].min() - cell
    nx = int((ref[:, 0].max() - x0) / cell) + 2
    ny = int((ref[:, 1].max() - y0) / cell) + 2
    starts, items = _build_grid(ref, cell, x0, y0, nx, ny)
    rx0 = math.floor(ref[:, 0].min() - delta - 2.0)
    ry0 = math.floor(ref[:, 1].min() - delta - 2.0)
    ras = _build_raster(ref, delta, rx0, ry0,
                        int(ref[:, 0].max() - rx0 + delta + 4.0),
                        int(ref[:, 1].max() - ry0 + delta + 4.0))
    tq = np.empty((nq, 2))
    _transform(qry, phi, vx, vy, cx, cy, tq)
    pairs = np.empty((min(n, nq), 2), dtype=np.int64)
    cnt = _score(ref, tq, delta * delta, cell, x0, y0, nx, ny, starts, items,
                 ras, rx0, ry0, 0, np.empty(n * nq), np.empty(n * nq, dtype=np.int64),
                 np.empty(n * nq, dtype=np.int64), np.zeros(n, dtype=np.bool_),
                 np.zeros(nq, dtype=np.bool_), pairs)
    return pairs[:cnt]


def match(reference, query, delta: float, eps: float = EPS, omega: float = OMEGA,
          S: float = S_MAX, center=(256.0, 256.0)) -> MatchResult:
    """Find the isometry mapping ``query`` onto ``reference`` with the most
    closest-first correspondences at distance < ``delta``.

    ``eps`` is a relative tolerance on seed-pair lengths, ``omega`` the
    rotation limit in degrees and ``S`` the translation limit in pixels.
    Returns a result with ``isometry=None`` when no seed passes the limits.
    """
    ref = np.ascontiguousarray(np.asarray(reference, dtype=float).reshape(-1, 2))
    qry = np.ascontiguousarray(np.asarray(query, dtype=float).reshape(-1, 2))
    if ref.shape[0] < 2 or qry.shape[0] < 2:
        return MatchResult(None)
    cx, cy = float(center[0]), float(center[1])
    best, phi, vx, vy = _search(ref, qry, float(delta), float(eps),
                                math.radians(omega), float(S), cx, cy)
    if best < 0:
        return MatchResult(None)
    pairs = _pairs_for(ref, qry, float(delta), phi, vx, vy, cx, cy)
    # the seed pair fixes the angle only to within the jitter; refit it on
    # all correspondences and keep the refit if it loses no pairs
    if len(pairs) >= 3:
        rphi, rvx, rvy = _refit(ref[pairs[:, 0]], qry[pairs[:, 1]], cx, cy)
        if abs(rphi) < math.radians(omega) and math.hypot(rvx, rvy) < S:
            refit = _pairs_for(ref, qry, float(delta), rphi, rvx, rvy, cx, cy)
            if len(refit) >= len(pairs):
                pairs, phi, vx, vy = refit, rphi, rvx, rvy
    pairs = sorted((int(r), int(q)) for r, q in pairs)
    return MatchResult(Isometry(math.degrees(phi), (vx, vy), (cx, cy)), pairs)


def _refit(p: np.ndarray, q: np.ndarray, cx: float, cy: float) -> tuple[float, float, float]:
    """Least-squares rotation about (cx, cy) plus translation taking q to p."""
    pm, qm = p.mean(axis=0), q.mean(axis=0)
    dp, dq = p - pm, q - qm
    phi = math.atan2(float(np.sum(dq[:, 0] * dp[:, 1] - dq[:, 1] * dp[:, 0])),
                     float(np.sum(dq[:, 0] * dp[:, 0] + dq[:, 1] * dp[:, 1])))
    c, s = math.cos(phi), math.sin(phi)
    rx, ry = qm[0] - cx, qm[1] - cy
    return phi, float(pm[0] - cx - (c * rx - s * ry)), float(pm[1] - cy - (s * rx + c * ry))


def rotation_gate(m: MatchResult, rho: float = RHO) -> bool:
    """Accept unless the matched rotation exceeds ``rho`` degrees."""
    if m.isometry is None:
        return False
    return abs(m.isometry.phi) <= rho
