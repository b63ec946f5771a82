import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuzzyvault.prealign import (AlignmentReport, EmptyForeground, GrayImage, align_points,
                                 apply_rotation, prealign, read_pgm, rotate_points, write_pgm)


def upright_ellipse(size=512, a=110, b=180, dx=0, dy=0):
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2
    inside = ((xx - c - dx) / a) ** 2 + ((yy - c - dy) / b) ** 2 <= 1
    return GrayImage(np.where(inside, 0, 255).astype(np.uint8))


def test_axis_aligned_is_stable():
    rep = prealign(upright_ellipse())
    assert abs(rep.total_rotation) <= 1


@pytest.mark.parametrize("theta", [-15, -5, 5, 10, 15])
def test_tilt_is_undone(theta):
    rep = prealign(apply_rotation(upright_ellipse(), theta))
    assert abs(rep.total_rotation + theta) <= 2


def test_off_centre_tilt():
    img = apply_rotation(upright_ellipse(dx=40, dy=-25), 12)
    assert abs(prealign(img).total_rotation + 12) <= 2


def test_empty_foreground():
    with pytest.raises(EmptyForeground):
        prealign(GrayImage(np.full((64, 64), 255, dtype=np.uint8)))


def test_rotation_zero_is_identity():
    img = upright_ellipse(64, 10, 20)
    assert np.array_equal(apply_rotation(img, 0).pixels, img.pixels)


def test_rotation_round_trip():
    rng = np.random.default_rng(0)
    pix = rng.integers(0, 256, (65, 65), dtype=np.uint8)
    back = apply_rotation(apply_rotation(GrayImage(pix), 90), -90).pixels
    assert np.array_equal(back[2:-2, 2:-2], pix[2:-2, 2:-2])


def test_single_pixel_rotation():
    size = 65
    c = 32
    pix = np.full((size, size), 255, dtype=np.uint8)
    pix[c, c + 10] = 0                         # (x, y) = (c + 10, c)
    rows, cols = np.nonzero(apply_rotation(GrayImage(pix), 90).pixels < 128)
    assert abs(cols[0] - c) <= 1 and abs(rows[0] - (c - 10)) <= 1


def test_points_follow_image_rotation():
    size, c = 65, 32.0
    pt = rotate_points([(c + 10, c)], 90, (c, c))[0]
    assert pt == pytest.approx((c, c - 10), abs=1e-9)


@given(st.floats(-45, 45), st.floats(-50, 50), st.floats(-50, 50))
@settings(max_examples=50)
def test_align_points_matches_manual(deg, sx, sy):
    pts = np.array([[10.0, 20.0], [300.0, 400.0]])
    rep = AlignmentReport(deg, 1, (sx, sy))
    want = rotate_points(pts + (sx, sy), deg, (255.5, 255.5))
    assert np.allclose(align_points(pts, rep, (255.5, 255.5)), want)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = GrayImage(rng.integers(0, 256, (7, 9), dtype=np.uint8))
    path = tmp_path / "x.pgm"
    write_pgm(img, path)
    assert path.read_bytes().startswith(b"P5\n9 7\n255\n")
    assert np.array_equal(read_pgm(path).pixels, img.pixels)
