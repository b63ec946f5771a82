"""Planar primitives: the minutiae ellipse, lattice disk counts, distances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse on the integer pixel grid.

    The default sits in the centre of a 512x512 frame and holds about
    86,900 lattice points.
    """

    cx: int = 256
    cy: int = 256
    A: int = 208
    B: int = 133

    @property
    def center(self) -> tuple[int, int]:
        return (self.cx, self.cy)

    def contains(self, a, b) -> bool | np.ndarray:
        # exact integer test: (a-cx)^2 B^2 + (b-cy)^2 A^2 <= A^2 B^2
        da = np.asarray(a) - self.cx
        db = np.asarray(b) - self.cy
        inside = da * da * self.B**2 + db * db * self.A**2 <= (self.A * self.B) ** 2
        return bool(inside) if np.ndim(inside) == 0 else inside

    @cached_property
    def lattice(self) -> np.ndarray:
        """All integer points inside, shape (area_px, 2), sorted by (a, b)."""
        cols = []
        A2B2 = (self.A * self.B) ** 2
        for da in range(-self.A, self.A + 1):
            rem = A2B2 - da * da * self.B**2
            h = math.isqrt(rem // (self.A**2)) if rem >= 0 else -1
            # isqrt of the floored quotient can undershoot by one
            while (h + 1) ** 2 * self.A**2 <= rem:
                h += 1
            if h < 0:
                continue
            bs = np.arange(self.cy - h, self.cy + h + 1)
            cols.append(np.column_stack([np.full(bs.size, self.cx + da), bs]))
        return np.concatenate(cols).astype(np.int64)

    @cached_property
    def area_px(self) -> int:
        return int(self.lattice.shape[0])

    def header(self) -> str:
        return f"{self.cx},{self.cy},{self.A},{self.B}"

    @classmethod
    def parse(cls, text: str) -> "Ellipse":
        cx, cy, A, B = (int(v) for v in text.split(","))
        return cls(cx, cy, A, B)


def in_ellipse(p, e: Ellipse) -> bool:
    return e.contains(p[0], p[1])


def dist(p, p2) -> float:
    return math.hypot(p[0] - p2[0], p[1] - p2[1])


def v_delta_formula(delta: float) -> int:
    """Closed-form lattice disk count with sum bound ceil(delta - 1)."""
    total = 0
    for i in range(1, math.ceil(delta - 1) + 1):
        total += math.ceil(math.sqrt(delta * delta - i * i))
    return 1 + 4 * total


@lru_cache(maxsize=None)
def v_delta_bruteforce(delta: float) -> int:
    """Number of integer points (a, b) with a^2 + b^2 < delta^2."""
    if not 1 <= delta <= 64:
        raise ValueError("delta must lie in [1, 64]")
    m = math.ceil(delta)
    g = np.arange(-m, m + 1)
    a, b = np.meshgrid(g, g)
    return int(np.count_nonzero(a * a + b * b < delta * delta))


def v_delta(delta: float) -> int:
    """Authoritative lattice disk count (brute force)."""
    return v_delta_bruteforce(delta)
