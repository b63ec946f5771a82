"""Synthetic fingers and noisy impressions standing in for a sensor.

Each finger is a set of true minutiae spread over the ellipse.  An
impression applies jitter, a global isometry, missed minutiae, spurious
minutiae and quality scores, and keeps the ground truth so tests can score
the matcher exactly.  Impressions can carry a rendered finger silhouette
that moves with the same isometry, which is what pre-alignment looks at.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Ellipse
from .matcher import Isometry
from .minutiae import Impression, write_query
from .prealign import GrayImage


class PlacementFailure(RuntimeError):
    pass


@dataclass
class NoiseModel:
    jitter_radius: float = 0.0
    p_delete: float = 0.0
    n_spurious: float = 0.0
    global_rot: float = 0.0
    global_trans: float = 0.0
    true_quality: tuple[float, float] = (0.3, 1.0)
    spurious_quality: tuple[float, float] = (0.0, 0.6)
    round_coords: bool = True

    def __post_init__(self):
        if not 0 <= self.p_delete <= 1:
            raise ValueError("p_delete must lie in [0, 1]")
        if self.jitter_radius < 0 or self.n_spurious < 0:
            raise ValueError("jitter_radius and n_spurious must be >= 0")


@dataclass
class SyntheticFinger:
    theta: int
    minutiae: np.ndarray     # (n, 2) int


@dataclass
class SampledImpression:
    impression: Impression
    isometry: Isometry
    truth: np.ndarray        # index into the finger's minutiae, -1 for spurious


def place_points(n: int, ellipse: Ellipse, spacing: float, rng: np.random.Generator,
                 max_rejections: int = 10_000) -> np.ndarray:
    """n lattice points of the ellipse, pairwise >= spacing apart."""
    lattice = ellipse.lattice
    out = np.empty((n, 2), dtype=np.int64)
    s2 = spacing * spacing
    for i in range(n):
        for _ in range(max_rejections):
            p = lattice[rng.integers(len(lattice))]
            if i == 0 or np.min(((out[:i] - p) ** 2).sum(1)) >= s2:
                out[i] = p
                break
        else:
            raise PlacementFailure(f"cannot place point {i + 1} of {n} at spacing {spacing}")
    return out


def gen_population(n_users: int, f: int, per_finger_count: int, rng: np.random.Generator,
                   ellipse: Ellipse | None = None, spacing: float = 8.0
                   ) -> list[list[SyntheticFinger]]:
    ellipse = ellipse or Ellipse()
    return [[SyntheticFinger(theta, place_points(per_finger_count, ellipse, spacing, rng))
             for theta in range(1, f + 1)]
            for _ in range(n_users)]


def _disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    rad = radius * np.sqrt(rng.random(n))
    ang = rng.uniform(0, 2 * math.pi, n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def render_silhouette(iso: Isometry, size: int = 512, semi_axes=(140.0, 220.0)) -> GrayImage:
    """Dark upright elliptical finger shape, moved by ``iso``, on white."""
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    c = (size - 1) / 2.0
    t = math.radians(iso.phi)
    cs, sn = math.cos(t), math.sin(t)
    # inverse isometry back to the canonical pose
    px = xx - iso.center[0] - iso.v[0]
    py = yy - iso.center[1] - iso.v[1]
    ux = cs * px + sn * py + iso.center[0] - c
    uy = -sn * px + cs * py + iso.center[1] - c
    inside = (ux / semi_axes[0]) ** 2 + (uy / semi_axes[1]) ** 2 <= 1.0
    return GrayImage(np.where(inside, 0, 255).astype(np.uint8))


def sample_impression(finger: SyntheticFinger, noise: NoiseModel, rng: np.random.Generator,
                      ellipse: Ellipse | None = None, render: bool = False,
                      frame: int = 512) -> SampledImpression:
    ellipse = ellipse or Ellipse()
    true = finger.minutiae.astype(float)
    n = len(true)
    phi = rng.uniform(-noise.global_rot, noise.global_rot) if noise.global_rot else 0.0
    v = (tuple(rng.uniform(-noise.global_trans, noise.global_trans, 2))
         if noise.global_trans else (0.0, 0.0))
    iso = Isometry(float(phi), (float(v[0]), float(v[1])), (float(ellipse.cx), float(ellipse.cy)))

    jittered = true + _disk(n, noise.jitter_radius, rng) if noise.jitter_radius else true
    moved = iso.apply(jittered) if n else jittered.reshape(0, 2)
    keep = rng.random(n) >= noise.p_delete
    n_sp = int(rng.poisson(noise.n_spurious)) if noise.n_spurious else 0
    lattice = ellipse.lattice
    spurious = lattice[rng.integers(len(lattice), size=n_sp)].astype(float)
    if n_sp:
        spurious = iso.apply(spurious)

    pts = np.vstack([moved[keep], spurious.reshape(-1, 2)])
    truth = np.concatenate([np.nonzero(keep)[0], np.full(n_sp, -1)]).astype(np.int64)
    qual = np.concatenate([rng.uniform(*noise.true_quality, int(keep.sum())),
                           rng.uniform(*noise.spurious_quality, n_sp)])
    order = rng.permutation(len(pts))
    pts, truth, qual = pts[order], truth[order], qual[order]
    if noise.round_coords:
        pts = np.rint(pts)
    image = render_silhouette(iso, frame) if render else None
    return SampledImpression(Impression(pts, qual, image), iso, truth)


def dump_user(user: list[SyntheticFinger], path) -> None:
    """Truth file: a ``[finger <theta>]`` section per finger, then ``<a> <b>`` lines."""
    lines = []
    for finger in user:
        lines.append(f"[finger {finger.theta}]")
        lines += [f"{a} {b}" for a, b in finger.minutiae.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_user(path) -> list[SyntheticFinger]:
    fingers: list[SyntheticFinger] = []
    pts: list[tuple[int, int]] = []
    theta = None
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("[finger"):
            if theta is not None:
                fingers.append(SyntheticFinger(theta, np.array(pts, dtype=np.int64).reshape(-1, 2)))
            theta = int(line[len("[finger"):-1])
            pts = []
        else:
            a, b = line.split()
            pts.append((int(a), int(b)))
    if theta is not None:
        fingers.append(SyntheticFinger(theta, np.array(pts, dtype=np.int64).reshape(-1, 2)))
    return fingers


def write_impression(s: SampledImpression, path) -> None:
    write_query(s.impression, path)
