"""Image pre-alignment by quadrant balancing, plus 8-bit PGM I/O.

Angles are degrees, positive meaning counter-clockwise as seen on screen
(rows grow downwards).  :func:`rotate_points` uses the same convention, so
an angle found on an image can be applied to minutiae coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class EmptyForeground(ValueError):
    pass


@dataclass
class GrayImage:
    """8-bit grayscale image, ``pixels[row, col]``."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError("image must be a nonempty 2-D array")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class AlignmentReport:
    total_rotation: int
    iterations: int
    centroid_shift: tuple[float, float]


def read_pgm(path) -> GrayImage:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    pos += 1
    pix = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise ValueError("truncated PGM")
    return GrayImage(pix.reshape(h, w).copy())


def write_pgm(img: GrayImage, path) -> None:
    head = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(head + img.pixels.tobytes())


def _rotate_array(arr: np.ndarray, degrees: float, fill, center=None):
    """Nearest-neighbour rotation; returns (rotated, source_row_of_each_pixel)."""
    h, w = arr.shape
    cy, cx = ((h - 1) / 2.0, (w - 1) / 2.0) if center is None else center
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    yy, xx = np.mgrid[0:h, 0:w]
    dx = xx - cx
    dy = yy - cy
    # inverse map: destination -> source
    sx = c * dx - s * dy + cx
    sy = s * dx + c * dy + cy
    ix = np.rint(sx).astype(np.int64)
    iy = np.rint(sy).astype(np.int64)
    ok = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.full_like(arr, fill)
    out[ok] = arr[iy[ok], ix[ok]]
    return out, iy


def apply_rotation(img: GrayImage, degrees: float) -> GrayImage:
    """Rotate about the geometric centre; uncovered pixels become white."""
    if degrees == 0:
        return GrayImage(img.pixels.copy())
    out, _ = _rotate_array(img.pixels, degrees, 255)
    return GrayImage(out)


def rotate_points(points, degrees: float, center) -> np.ndarray:
    """Rotate (x, y) pixel coordinates the same way :func:`apply_rotation`
    rotates image content."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    d = pts - np.asarray(center, dtype=float)
    out = np.empty_like(d)
    out[:, 0] = c * d[:, 0] + s * d[:, 1]
    out[:, 1] = -s * d[:, 0] + c * d[:, 1]
    return out + center


def _downscale(pix: np.ndarray, factor: int) -> np.ndarray:
    if factor <= 1:
        return pix.astype(float)
    h = pix.shape[0] // factor * factor
    w = pix.shape[1] // factor * factor
    blk = pix[:h, :w].astype(float).reshape(h // factor, factor, w // factor, factor)
    return blk.mean(axis=(1, 3))


def _quadrant_sign(mask: np.ndarray) -> int:
    """-1 (clockwise) when upper-left + lower-right outweighs the other diagonal."""
    h, w = mask.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.nonzero(mask)
    upper = yy < cy
    lower = yy > cy
    left = xx < cx
    right = xx > cx
    main = np.count_nonzero(upper & left) + np.count_nonzero(lower & right)
    anti = np.count_nonzero(lower & left) + np.count_nonzero(upper & right)
    return -1 if main > anti else 1


def prealign(img: GrayImage, brightness_threshold: int = 128, downscale: int = 4,
             cap: int = 45) -> AlignmentReport:
    """Estimate the rotation that balances opposing quadrants of the finger
    silhouette.

    Dark pixels (below ``brightness_threshold``) form the silhouette.  It is
    shifted so its centroid sits at the image centre, then rotated in 1 degree
    steps until the step direction flips or ``cap`` steps were taken.
    ``centroid_shift`` is reported in full-resolution pixels.
    """
    small = _downscale(img.pixels, downscale)
    mask = small < brightness_threshold
    if not mask.any():
        raise EmptyForeground("no pixel below the brightness threshold")
    h, w = mask.shape
    yy, xx = np.nonzero(mask)
    sy = (h - 1) / 2.0 - yy.mean()
    sx = (w - 1) / 2.0 - xx.mean()
    ny = np.rint(yy + sy).astype(np.int64)
    nx = np.rint(xx + sx).astype(np.int64)
    ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    base = np.zeros_like(mask)
    base[ny[ok], nx[ok]] = True

    # a silhouette cut off by the lower frame edge leaves a wedge when
    # rotated; only then is the wedge cropped away row-wise
    touches_bottom = bool(base[-1].any())
    crop_row = h
    total = 0
    prev = 0
    steps = 0
    cur = base
    while steps < cap:
        step = _quadrant_sign(cur)
        if prev and step != prev:
            total += step
            steps += 1
            break
        total += step
        prev = step
        steps += 1
        cur, src_row = _rotate_array(base, total, False)
        if touches_bottom:
            wedge = np.nonzero((src_row >= h).any(axis=1))[0]
            if wedge.size:
                crop_row = min(crop_row, int(wedge[0]))
            cur[crop_row:] = False
    if abs(total) > cap:
        total = int(math.copysign(cap, total))
    return AlignmentReport(int(total), steps, (sx * downscale, sy * downscale))


def align_points(points, report: AlignmentReport, frame_center) -> np.ndarray:
    """Apply a pre-alignment (centroid shift then rotation) to coordinates."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2) + report.centroid_shift
    return rotate_points(pts, report.total_rotation, frame_center)
