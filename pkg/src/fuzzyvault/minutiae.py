"""Minutia records, impressions and the plain-text query format."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .prealign import GrayImage


class Minutia(NamedTuple):
    theta: int
    a: int
    b: int
    quality: float | None = None

    @property
    def xy(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass
class Impression:
    """Minutiae locations of one capture of one finger.

    ``quality`` is either ``None`` or one value in [0, 1] per point.  An
    optional silhouette ``image`` lets the pipeline pre-align the capture.
    """

    points: np.ndarray
    quality: np.ndarray | None = None
    image: GrayImage | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.quality is not None:
            self.quality = np.asarray(self.quality, dtype=float).reshape(-1)
            if self.quality.shape[0] != self.points.shape[0]:
                raise ValueError("one quality value per point required")

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, keep) -> "Impression":
        q = None if self.quality is None else self.quality[keep]
        return Impression(self.points[keep], q, self.image)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_query(imp: Impression, path) -> None:
    """One minutia per line: ``<a> <b> [<quality>]``."""
    lines = []
    for i, (a, b) in enumerate(imp.points):
        row = f"{_fmt(a)} {_fmt(b)}"
        if imp.quality is not None:
            row += f" {imp.quality[i]:.4f}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_query(path) -> Impression:
    pts, qual = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"{path}:{lineno}: expected '<a> <b> [<quality>]'")
        pts.append((float(parts[0]), float(parts[1])))
        qual.append(float(parts[2]) if len(parts) == 3 else None)
    if any(q is None for q in qual):
        if not all(q is None for q in qual):
            raise ValueError(f"{path}: quality given for some minutiae only")
        quality = None
    else:
        quality = np.array(qual)
    return Impression(np.array(pts).reshape(-1, 2), quality)
