"""Enrollment: reliable minutiae, template selection, chaff, vault assembly
and the vault file format."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .field import FieldPoly, commit, is_prime, next_prime, poly_eval
from .geometry import Ellipse, v_delta
from .matcher import EPS, OMEGA, RHO, S_MAX, match
from .minutiae import Impression, Minutia
from .prealign import align_points, prealign


class EnrollmentError(Exception):
    pass


class FingerBelowChi(EnrollmentError):
    def __init__(self, theta: int, found: int, chi: int):
        super().__init__(f"finger {theta}: {found} reliable minutiae, need {chi}")
        self.theta = theta


class NotEnoughReliableMinutiae(EnrollmentError):
    def __init__(self, found: int, t: int):
        super().__init__(f"ERROR: Not enough reliable minutiae ({found} < t={t})")


class ChaffPlacementFailure(EnrollmentError):
    pass


class DuplicatePoint(ValueError):
    pass


class MalformedVault(ValueError):
    pass


@dataclass
class SystemParams:
    f: int = 2
    u: int = 2
    t: int = 20
    r: int = 80
    k: int = 8
    d: int | None = None          # default floor(1.5 * delta_v)
    chi: int = 5
    delta_e: float = 10.0
    delta_v: float = 7.0
    Q: float = 0.3
    rho: float = RHO
    q: int | None = None          # default: smallest prime >= r
    ellipse: Ellipse = field(default_factory=Ellipse)
    eps: float = EPS
    omega: float = OMEGA
    S: float = S_MAX
    prealign: bool = True
    frame: int = 512
    budget: int = 100_000
    expected_correct: float | None = None   # None -> stage-2 subsets of size k
    chaff_rejections: int = 10_000

    def __post_init__(self):
        if self.d is None:
            self.d = int(math.floor(1.5 * self.delta_v))
        if self.q is None:
            self.q = next_prime(self.r)

    @property
    def center(self) -> tuple[float, float]:
        return (float(self.ellipse.cx), float(self.ellipse.cy))

    @property
    def frame_center(self) -> tuple[float, float]:
        c = (self.frame - 1) / 2.0
        return (c, c)

    def validate(self) -> "SystemParams":
        problems = []
        if self.f < 2:
            problems.append("f >= 2 required")
        if not (self.k < self.t < self.r <= self.q):
            problems.append(f"need k < t < r <= q, got k={self.k} t={self.t} r={self.r} q={self.q}")
        if not is_prime(self.q):
            problems.append(f"q={self.q} is not prime")
        if self.chi * self.f > self.t:
            problems.append(f"chi={self.chi} exceeds t/f")
        if self.d < 1:
            problems.append("d >= 1 required")
        cap = 0.45 * self.ellipse.area_px / v_delta(self.d)
        if self.r / self.f >= cap:
            problems.append(f"r/f={self.r / self.f:.1f} exceeds packing capacity {cap:.1f}")
        if not 0 <= self.Q <= 1:
            problems.append("Q must lie in [0, 1]")
        if problems:
            raise ValueError("; ".join(problems))
        return self


# -- minimum-distance bookkeeping -------------------------------------------------

class _Occupancy:
    """Grid of placed points on one finger for ``>= d`` spacing checks."""

    def __init__(self, d: float):
        self.d = d
        self.cells: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def _cell(self, p):
        return (int(math.floor(p[0] / self.d)), int(math.floor(p[1] / self.d)))

    def fits(self, p) -> bool:
        cx, cy = self._cell(p)
        d2 = self.d * self.d
        for i in (cx - 1, cx, cx + 1):
            for j in (cy - 1, cy, cy + 1):
                for o in self.cells.get((i, j), ()):
                    if (o[0] - p[0]) ** 2 + (o[1] - p[1]) ** 2 < d2:
                        return False
        return True

    def add(self, p) -> None:
        self.cells.setdefault(self._cell(p), []).append((p[0], p[1]))


def enforce_min_distance(points: np.ndarray, d: float, rng: np.random.Generator) -> np.ndarray:
    """Drop points until all pairs are >= d apart.

    The closest violating pair is resolved first; which of the two goes is
    a coin flip.
    """
    pts = np.asarray(points).reshape(-1, 2)
    alive = np.ones(len(pts), dtype=bool)
    if len(pts) < 2:
        return pts
    diff = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt((diff.astype(float) ** 2).sum(-1))
    np.fill_diagonal(D, np.inf)
    while True:
        sub = np.where(alive[:, None] & alive[None, :], D, np.inf)
        i, j = np.unravel_index(np.argmin(sub), sub.shape)
        if sub[i, j] >= d:
            break
        alive[i if rng.random() < 0.5 else j] = False
    return pts[alive]


# -- enrollment steps -------------------------------------------------------------

def _aligned(imp: Impression, params: SystemParams) -> np.ndarray:
    if params.prealign and imp.image is not None:
        rep = prealign(imp.image)
        return align_points(imp.points, rep, params.frame_center)
    return imp.points


def reliable_minutiae(impressions: Sequence[Impression], theta: int, params: SystemParams,
                      rng: np.random.Generator) -> list[Minutia]:
    """Minutiae of the first impression found in every other impression,
    at their mean location, restricted to the ellipse and spaced >= d."""
    if not impressions:
        return []
    sets = [_aligned(imp, params) for imp in impressions]
    first = sets[0]
    acc = first.astype(float).copy()
    seen = np.ones(len(first), dtype=bool)
    for other in sets[1:]:
        m = match(first, other, params.delta_e, params.eps, params.omega, params.S,
                  params.center)
        hit = np.zeros(len(first), dtype=bool)
        if m.isometry is not None and m.pairs:
            ref_idx = np.array([p[0] for p in m.pairs])
            qry_idx = np.array([p[1] for p in m.pairs])
            acc[ref_idx] += m.isometry.apply(other[qry_idx])
            hit[ref_idx] = True
        seen &= hit
    mean = np.rint(acc[seen] / len(sets)).astype(np.int64)
    if len(mean):
        mean = mean[params.ellipse.contains(mean[:, 0], mean[:, 1])]
    mean = enforce_min_distance(mean, params.d, rng)
    return sorted(Minutia(theta, int(a), int(b)) for a, b in mean)


def select_template(pool: dict[int, Sequence[Minutia]], params: SystemParams,
                    rng: np.random.Generator, max_draws: int = 1_000_000) -> list[Minutia]:
    """Uniform t-subset of the pool conditioned on >= chi minutiae per finger."""
    for theta in range(1, params.f + 1):
        n = len(pool.get(theta, ()))
        if n < params.chi:
            raise FingerBelowChi(theta, n, params.chi)
    flat = [m for theta in sorted(pool) for m in pool[theta]]
    if len(flat) < params.t:
        raise NotEnoughReliableMinutiae(len(flat), params.t)
    fingers = np.array([m.theta for m in flat])
    for _ in range(max_draws):
        pick = rng.choice(len(flat), size=params.t, replace=False)
        counts = np.bincount(fingers[pick], minlength=params.f + 1)[1:]
        if counts.min() >= params.chi:
            return sorted(flat[i] for i in pick)
    raise NotEnoughReliableMinutiae(len(flat), params.t)


def add_chaff(template: Sequence[Minutia], params: SystemParams, rng: np.random.Generator,
              r: int | None = None) -> list[Minutia]:
    """Draw r - t chaff points uniformly from the ellipse on uniformly chosen
    fingers, each >= d from every point already on that finger."""
    r = params.r if r is None else r
    n_chaff = r - len(template)
    if n_chaff < 0:
        raise ValueError("template larger than r")
    occ = {theta: _Occupancy(params.d) for theta in range(1, params.f + 1)}
    for m in template:
        occ[m.theta].add((m.a, m.b))
    lattice = params.ellipse.lattice
    chaff = []
    for _ in range(n_chaff):
        theta = int(rng.integers(1, params.f + 1))
        for _attempt in range(params.chaff_rejections):
            a, b = lattice[rng.integers(len(lattice))]
            if occ[theta].fits((a, b)):
                occ[theta].add((a, b))
                chaff.append(Minutia(theta, int(a), int(b)))
                break
        else:
            raise ChaffPlacementFailure(
                f"no room for chaff on finger {theta} after "
                f"{params.chaff_rejections} rejections (d={params.d})")
    return chaff


@dataclass
class Vault:
    """Lexicographically ordered (theta, a, b, y) rows plus the commitment."""

    q: int
    f: int
    k: int
    d: int
    ellipse: Ellipse
    rows: np.ndarray
    commitment: bytes

    @property
    def r(self) -> int:
        return self.rows.shape[0]

    def x_of(self, position: int) -> int:
        """Field abscissa E(i) = i mod q of a 1-based position."""
        return position % self.q

    def finger(self, theta: int) -> tuple[np.ndarray, np.ndarray]:
        """(1-based positions, (n, 2) locations) of the points on one finger."""
        idx = np.nonzero(self.rows[:, 0] == theta)[0]
        return idx + 1, self.rows[idx, 1:3]

    def to_text(self) -> str:
        e = self.ellipse
        out = ["FFV1",
               f"q={self.q} f={self.f} r={self.r} k={self.k} d={self.d} ell={e.header()}"]
        out += [f"{th} {a} {b} {y}" for th, a, b, y in self.rows.tolist()]
        out.append("H=" + self.commitment.hex())
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_text().encode("ascii"))

    @classmethod
    def load(cls, path) -> "Vault":
        return cls.from_text(Path(path).read_bytes().decode("ascii"))

    @classmethod
    def from_text(cls, text: str) -> "Vault":
        if "\r" in text:
            raise MalformedVault("CR line endings are not allowed")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) < 3 or lines[0] != "FFV1":
            raise MalformedVault("missing FFV1 magic")
        m = re.fullmatch(r"q=(\d+) f=(\d+) r=(\d+) k=(\d+) d=(\d+) ell=(-?\d+),(-?\d+),(\d+),(\d+)",
                         lines[1])
        if not m:
            raise MalformedVault("bad header line")
        q, f, r, k, d = (int(m.group(i)) for i in range(1, 6))
        ell = Ellipse(*(int(m.group(i)) for i in range(6, 10)))
        if not is_prime(q) or r > q or k < 1 or f < 1 or d < 1:
            raise MalformedVault("header violates q prime, r <= q, k, f, d >= 1")
        if len(lines) != r + 3:
            raise MalformedVault(f"expected {r} point lines")
        hm = re.fullmatch(r"H=([0-9a-f]{64})", lines[-1])
        if not hm:
            raise MalformedVault("bad commitment line")
        rows = []
        for ln in lines[2:-1]:
            if not re.fullmatch(r"\d+ -?\d+ -?\d+ \d+", ln):
                raise MalformedVault(f"bad point line {ln!r}")
            rows.append([int(v) for v in ln.split()])
        rows = np.array(rows, dtype=np.int64).reshape(-1, 4)
        vault = cls(q, f, k, d, ell, rows, bytes.fromhex(hm.group(1)))
        vault.check()
        return vault

    def check(self) -> None:
        """Raise MalformedVault unless ordering, range and spacing hold."""
        rows = self.rows
        if rows.shape[0] > self.q:
            raise MalformedVault("r exceeds q")
        if np.any((rows[:, 0] < 1) | (rows[:, 0] > self.f)):
            raise MalformedVault("finger index out of range")
        if np.any((rows[:, 3] < 0) | (rows[:, 3] >= self.q)):
            raise MalformedVault("y outside [0, q)")
        keys = [tuple(r) for r in rows[:, :3].tolist()]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise MalformedVault("points not in strictly increasing (theta, a, b) order")
        if len(rows) and not np.all(self.ellipse.contains(rows[:, 1], rows[:, 2])):
            raise MalformedVault("point outside the ellipse")
        for theta in range(1, self.f + 1):
            _, pts = self.finger(theta)
            if len(pts) > 1:
                diff = pts[:, None, :] - pts[None, :, :]
                D2 = (diff ** 2).sum(-1)
                np.fill_diagonal(D2, np.iinfo(np.int64).max)
                if D2.min() < self.d * self.d:
                    raise MalformedVault(f"points on finger {theta} closer than d={self.d}")


def build_vault(template: Sequence[Minutia], chaff: Sequence[Minutia], poly: FieldPoly,
                params: SystemParams, rng: np.random.Generator) -> Vault:
    """Order all points lexicographically and attach y values: P(E(i)) for
    genuine points, a uniform value other than P(E(i)) for chaff."""
    q = poly.q
    tagged = [((m.theta, m.a, m.b), True) for m in template]
    tagged += [((m.theta, m.a, m.b), False) for m in chaff]
    tagged.sort(key=lambda item: item[0])
    keys = [key for key, _ in tagged]
    if len(set(keys)) != len(keys):
        raise DuplicatePoint("two points share (theta, a, b)")
    if len(keys) > q:
        raise ValueError("r exceeds q")
    rows = np.empty((len(keys), 4), dtype=np.int64)
    for i, (key, genuine) in enumerate(tagged, start=1):
        fx = poly_eval(poly, i % q)
        if genuine:
            y = fx
        else:
            y = int(rng.integers(0, q - 1))
            if y >= fx:
                y += 1
        rows[i - 1] = (*key, y)
    return Vault(q, params.f, poly.k, params.d, params.ellipse, rows, commit(poly))


@dataclass
class Enrollment:
    vault: Vault
    poly: FieldPoly
    template: list[Minutia]


def enroll(impressions: Sequence[Sequence[Impression]], params: SystemParams,
           rng: np.random.Generator) -> Enrollment:
    """Full enrollment for one user; ``impressions[theta - 1]`` holds the u
    captures of finger theta."""
    if len(impressions) != params.f:
        raise ValueError(f"need impressions for {params.f} fingers")
    poly = FieldPoly.random(params.k, params.q, rng)
    pool = {theta: reliable_minutiae(imps, theta, params, rng)
            for theta, imps in enumerate(impressions, start=1)}
    template = select_template(pool, params, rng)
    chaff = add_chaff(template, params, rng)
    vault = build_vault(template, chaff, poly, params, rng)
    return Enrollment(vault, poly, template)


def enroll_template(template: Sequence[Minutia], params: SystemParams,
                    rng: np.random.Generator) -> Enrollment:
    """Lock a ready-made template: fresh polynomial, chaff up to r, vault."""
    poly = FieldPoly.random(params.k, params.q, rng)
    template = sorted(template)
    chaff = add_chaff(template, params, rng)
    return Enrollment(build_vault(template, chaff, poly, params, rng), poly, list(template))


@dataclass
class RecaptureLog:
    attempts: dict[int, int] = field(default_factory=dict)

    @property
    def retries(self) -> int:
        return sum(n - 1 for n in self.attempts.values())


def enroll_with_recapture(capture: Callable[[int, int], Sequence[Impression]],
                          params: SystemParams, rng: np.random.Generator,
                          max_attempts: int = 3) -> tuple[Enrollment, RecaptureLog]:
    """Enrollment with re-capture of fingers that fall below chi.

    ``capture(theta, attempt)`` returns u impressions of finger theta.  A
    finger still below chi after ``max_attempts`` captures raises
    FingerBelowChi (failure to enroll).
    """
    log = RecaptureLog()
    poly = FieldPoly.random(params.k, params.q, rng)
    pool = {}
    for theta in range(1, params.f + 1):
        for attempt in range(1, max_attempts + 1):
            log.attempts[theta] = attempt
            found = reliable_minutiae(capture(theta, attempt), theta, params, rng)
            if len(found) >= params.chi:
                break
        else:
            raise FingerBelowChi(theta, len(found), params.chi)
        pool[theta] = found
    template = select_template(pool, params, rng)
    chaff = add_chaff(template, params, rng)
    return Enrollment(build_vault(template, chaff, poly, params, rng), poly, template), log
