"""Shared fixtures for building planted instances."""
import numpy as np

from fuzzyvault.geometry import Ellipse
from fuzzyvault.matcher import Isometry
from fuzzyvault.synth import place_points


def disk(n, radius, rng):
    rad = radius * np.sqrt(rng.random(n))
    ang = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def planted(seed, n=30, delta=7.0, rot=10.0, trans=10.0, n_spurious=5, spacing=12.0,
            ellipse=None):
    """Reference points plus a query made by jittering (radius delta/2),
    applying a random isometry and appending spurious points.

    Returns (reference, query, isometry, truth) with truth[j] the reference
    index of query point j, or -1.
    """
    ellipse = ellipse or Ellipse()
    rng = np.random.default_rng(seed)
    ref = place_points(n, ellipse, spacing, rng).astype(float)
    iso = Isometry(float(rng.uniform(-rot, rot)), tuple(rng.uniform(-trans, trans, 2)),
                   (float(ellipse.cx), float(ellipse.cy)))
    moved = iso.apply(ref + disk(n, delta / 2, rng))
    spur = ellipse.lattice[rng.integers(ellipse.area_px, size=n_spurious)].astype(float)
    query = np.vstack([moved, spur])
    truth = np.concatenate([np.arange(n), np.full(n_spurious, -1)])
    order = rng.permutation(len(query))
    return ref, query[order], iso, truth[order]


def recall(pairs, truth):
    true_pairs = {(int(t), j) for j, t in enumerate(truth) if t >= 0}
    return len(true_pairs & set(pairs)) / len(true_pairs)
