import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage import color, data

from quatdeblur.metrics import (
    PSNR_CAP,
    ciede2000,
    error_map_image,
    kernel_ncc,
    mean_ciede2000,
    psnr,
    rgb_to_lab,
    scielab_map,
    ssim,
)

lab = st.tuples(st.floats(0, 100), st.floats(-120, 120), st.floats(-120, 120))


def test_psnr_cap_and_shape_checks(rng):
    a = rng.random((4, 4, 3))
    assert psnr(a, a) == PSNR_CAP
    assert psnr(a, a + 1e-12) == PSNR_CAP
    with pytest.raises(ValueError):
        psnr(a, a[:3])
    with pytest.raises(ValueError):
        psnr(a[..., 0], a[..., 0])


def test_ssim_bounds(rng):
    a = data.astronaut()[:64, :64] / 255.0
    assert ssim(a, a) == pytest.approx(1.0)
    assert ssim(a, rng.random(a.shape)) < 0.2


def test_lab_conversion_close_to_skimage(rng):
    rgb = rng.random((20, 20, 3))
    # Small differences come from the rounded matrix/white point conventions.
    np.testing.assert_allclose(rgb_to_lab(rgb), color.rgb2lab(rgb), atol=0.02)
    np.testing.assert_allclose(rgb_to_lab(np.ones(3)), [100.0, 0.0, 0.0], atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(lab, lab)
def test_ciede2000_against_skimage(x, y):
    ref = color.deltaE_ciede2000(np.array(x), np.array(y))
    assert ciede2000(np.array(x), np.array(y)) == pytest.approx(ref, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(lab, lab)
def test_ciede2000_symmetric_and_nonnegative(x, y):
    a, b = ciede2000(np.array(x), np.array(y)), ciede2000(np.array(y), np.array(x))
    assert a >= 0 and a == pytest.approx(b, abs=1e-9)
    assert ciede2000(np.array(x), np.array(x)) == 0.0


def test_mean_ciede2000(rng):
    a = rng.random((8, 8, 3))
    assert mean_ciede2000(a, a) == 0.0
    assert mean_ciede2000(a, np.clip(a + 0.1, 0, 1)) > 0


def test_scielab_map_properties(rng):
    a = data.coffee()[:48, :48] / 255.0
    b = np.clip(a + rng.normal(0, 0.03, a.shape), 0, 1)
    emap = scielab_map(a, b)
    assert emap.delta_e.shape == a.shape[:2]
    assert emap.total == pytest.approx(emap.delta_e.sum())
    assert emap.exceed_count == int(emap.exceed_mask().sum())
    assert emap.summary()["threshold"] == 5.0
    # Spatial filtering removes most of the high-frequency noise.
    plain = np.sqrt(((rgb_to_lab(a) - rgb_to_lab(b)) ** 2).sum(-1)).mean()
    assert emap.mean_de < plain
    with pytest.raises(ValueError):
        scielab_map(a, b, ppd=0)


def test_scielab_uniform_shift_equals_cie76(rng):
    a = np.full((32, 32, 3), 0.4)
    b = np.full((32, 32, 3), 0.45)
    emap = scielab_map(a, b)
    expected = np.linalg.norm(rgb_to_lab(a[0, 0]) - rgb_to_lab(b[0, 0]))
    np.testing.assert_allclose(emap.delta_e, expected, rtol=1e-6)


def test_error_map_image_tints_exceeding_pixels():
    a = np.zeros((4, 4, 3))
    b = a.copy()
    b[0, 0] = 1.0
    emap = scielab_map(a, b, ppd=1.0, threshold=5.0)
    out = error_map_image(b, emap)
    assert out[0, 0, 1] > 0.5
    np.testing.assert_array_equal(out[~emap.exceed_mask()], b[~emap.exceed_mask()])


def test_kernel_ncc():
    k = np.zeros((7, 7))
    k[3, 1:6] = 1.0
    assert kernel_ncc(k, k) == pytest.approx(1.0)
    assert kernel_ncc(k, np.roll(k, 1, axis=0)) == pytest.approx(1.0)
    assert kernel_ncc(k, k[1:-1, 1:-1]) == pytest.approx(1.0)
    assert kernel_ncc(k, k.T) < 0.5
    assert kernel_ncc(k, np.zeros((7, 7))) == 0.0
