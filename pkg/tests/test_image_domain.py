import math

import cv2
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatdeblur.image_domain import (
    GradientField,
    as_color_image,
    build_pyramid,
    crop,
    divergence_adjoint,
    gradient,
    load_image,
    pad_taper,
    pyramid_kernel_sizes,
    round_to_odd,
    save_image,
    upsample_kernel,
)
from quatdeblur.quat_core import QuatKernel


def test_gradient_values_and_wrap():
    u = np.arange(12, dtype=float).reshape(3, 4)
    g = gradient(u)
    np.testing.assert_array_equal(g.gx[:, :3], np.ones((3, 3)))
    np.testing.assert_array_equal(g.gx[:, 3], -3 * np.ones(3))
    np.testing.assert_array_equal(g.gy[:2], 4 * np.ones((2, 4)))
    assert g.gx.sum() == 0 and g.gy.sum() == 0


def test_divergence_is_exact_adjoint(rng):
    u = rng.standard_normal((7, 9, 3))
    g = GradientField(rng.standard_normal(u.shape), rng.standard_normal(u.shape))
    du = gradient(u)
    lhs = np.vdot(du.gx, g.gx) + np.vdot(du.gy, g.gy)
    assert lhs == pytest.approx(np.vdot(u, divergence_adjoint(g)), rel=1e-12)


def test_adjoint_of_single_impulse():
    gx = np.zeros((2, 5))
    gx[1, 2] = 1.0
    out = divergence_adjoint(GradientField(gx, np.zeros((2, 5))))[1]
    # Dx^T e_j = e_{j+1} - e_j
    np.testing.assert_array_equal(out, [0, 0, -1, 1, 0])


@given(st.floats(0.0, 200.0, allow_nan=False))
def test_round_to_odd_is_nearest_odd(x):
    r = round_to_odd(x)
    assert r % 2 == 1
    assert abs(r - x) <= 1.0


def test_round_to_odd_ties():
    assert round_to_odd(2.0) == 3
    assert round_to_odd(4.0) == 5
    assert round_to_odd(3.9) == 3


def test_pyramid_sizes_default():
    sizes, scales = pyramid_kernel_sizes(25, 1 / math.sqrt(2))
    assert sizes[-1] == 25 and sizes[0] == 3
    assert sizes == sorted(sizes)
    assert scales[-1] == 1.0
    for s, f in zip(sizes, scales):
        assert s == max(round_to_odd(25 * f), 3)


def test_pyramid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        pyramid_kernel_sizes(24, 0.7)
    with pytest.raises(ValueError):
        pyramid_kernel_sizes(25, 1.0)
    with pytest.raises(ValueError, match="too small"):
        build_pyramid(np.zeros((30, 30, 3)), 25)


def test_build_pyramid_shapes(rng):
    f = rng.random((80, 96, 3))
    p = build_pyramid(f, 15, 0.5)
    assert p.kernel_sizes == [3, 7, 15]
    assert [lvl.image.shape[0] for lvl in p.levels] == [20, 40, 80]
    assert p.levels[-1].image.shape == f.shape
    for lvl in p.levels:
        assert min(lvl.image.shape[:2]) >= 2 * lvl.kernel_size


def test_upsample_kernel_keeps_mass(rng):
    k = QuatKernel(np.concatenate([rng.random((1, 3, 3)), rng.standard_normal((3, 3, 3))]))
    big = upsample_kernel(k, 5)
    assert big.size == 5
    np.testing.assert_allclose(np.abs(big.data).sum(axis=(1, 2)), np.abs(k.data).sum(axis=(1, 2)))
    assert big.data[0].sum() == pytest.approx(k.data[0].sum())
    with pytest.raises(ValueError):
        upsample_kernel(k, 1)


def test_pad_taper_is_smooth_across_the_wrap(rng):
    u = rng.random((20, 24, 3))
    p = pad_taper(u, 4)
    assert p.shape == (28, 32, 3)
    np.testing.assert_array_equal(crop(p, 4), u)
    # Jumps across the periodic seam are no larger than interior cosine steps.
    seam = np.abs(p[:, 0] - p[:, -1]).max()
    assert seam < np.abs(u[:, 0] - u[:, -1]).max() / 4 + 1e-12
    np.testing.assert_array_equal(pad_taper(u, 0), u)


def test_as_color_image_validation():
    with pytest.raises(ValueError):
        as_color_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        as_color_image(np.full((2, 2, 3), np.inf))


@pytest.mark.parametrize("bit_depth,ext", [(8, ".png"), (16, ".png"), (8, ".ppm")])
def test_image_roundtrip(tmp_path, rng, bit_depth, ext):
    peak = 2 ** bit_depth - 1
    u = np.round(rng.random((9, 11, 3)) * peak) / peak
    path = tmp_path / f"img{ext}"
    save_image(u, path, bit_depth)
    np.testing.assert_allclose(load_image(path), u, atol=1e-12)


def test_image_channel_order(tmp_path):
    u = np.zeros((2, 2, 3))
    u[..., 0] = 1.0
    save_image(u, tmp_path / "red.png")
    raw = cv2.imread(str(tmp_path / "red.png"))
    assert raw[0, 0].tolist() == [0, 0, 255]  # BGR on disk


def test_image_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.png")
    cv2.imwrite(str(tmp_path / "gray.png"), np.zeros((4, 4), np.uint8))
    with pytest.raises(ValueError, match="color input required"):
        load_image(tmp_path / "gray.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ValueError):
        load_image(tmp_path / "junk.png")
    with pytest.raises(ValueError):
        save_image(np.zeros((2, 2, 3)), tmp_path / "x.jpg")
    with pytest.raises(ValueError):
        save_image(np.zeros((2, 2, 3)), tmp_path / "x.png", bit_depth=12)
