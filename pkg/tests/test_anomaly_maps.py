import numpy as np
import pytest

from anomaly_maps.alignment_map import alignment_field, default_selem_radius, upsample_am
from anomaly_maps.fuse_maps import _minmax, compute_anomaly_maps, fuse_pixelwise
from anomaly_maps.ssim_map import SsimParams, ssim_index, ssim_map
from io_utils.errors import ConfigurationError, ShapeError
from train_model.calibrate_am import AmNormalizer
from vqvae.vqvae_model import Quantization, init_model


def _quant(residuals):
    residuals = np.asarray(residuals, dtype=np.float32)
    h, w = residuals.shape
    return Quantization(indices=np.zeros((h, w), np.int64), quantized=np.zeros((h, w, 2), np.float32),
                        residuals=residuals)


# ---------------------------------------------------------------------
# SSIM map
# ---------------------------------------------------------------------

def test_ssim_params_defaults():
    p = SsimParams()
    assert p.window_side == 11 and p.gaussian_sigma == 1.5
    assert p.c1 == pytest.approx(1e-4) and p.c2 == pytest.approx(9e-4)
    assert SsimParams(dynamic_range=255).c1 == pytest.approx((0.01 * 255) ** 2)


@pytest.mark.parametrize("side", [2, 4, 1])
def test_ssim_window_side_must_be_odd(side):
    with pytest.raises(ValueError):
        SsimParams(window_side=side)


def test_self_similarity_is_zero(rng):
    for _ in range(100):
        x = rng.random((24, 24, 3))
        assert ssim_map(x, x).max() <= 1e-6


def test_symmetry_is_exact(rng):
    for _ in range(100):
        x, y = rng.random((24, 24, 3)), rng.random((24, 24, 3))
        np.testing.assert_array_equal(ssim_map(x, y), ssim_map(y, x))


def test_black_versus_white():
    sm = ssim_map(np.zeros((16, 16, 3)), np.ones((16, 16, 3)))
    c1 = 1e-4
    np.testing.assert_allclose(sm, (1 - c1 / (1 + c1)) / 2, atol=1e-6)
    assert sm.mean() == pytest.approx(0.49995, abs=1e-5)


def test_sm_range_and_shape(rng):
    x, y = rng.random((20, 28, 3)), rng.random((20, 28, 3))
    sm = ssim_map(x, y)
    assert sm.shape == (20, 28)
    assert sm.min() >= 0 and sm.max() <= 1


def test_ssim_accepts_grayscale(rng):
    x = rng.random((16, 16))
    assert ssim_index(x, x).shape == (16, 16)


def test_ssim_shape_mismatch():
    with pytest.raises(ShapeError):
        ssim_map(np.zeros((8, 8, 3)), np.zeros((8, 9, 3)))


def test_local_change_is_localised(rng):
    x = np.full((40, 40, 3), 0.4)
    y = x.copy()
    y[18:22, 18:22] = 0.9
    sm = ssim_map(x, y)
    assert sm[20, 20] > 0.1
    assert sm[2, 2] == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------
# Alignment map
# ---------------------------------------------------------------------

def test_alignment_field_zero_residuals():
    assert np.all(alignment_field(_quant(np.zeros((3, 3))), AmNormalizer(scale=0.5)) == 0)


def test_alignment_field_is_linear():
    field = alignment_field(_quant([[2.0, 0.0]]), AmNormalizer(scale=1.0))
    assert field[0, 0] == 2.0
    c = 0.37
    r = np.array([[2 * c, c]], dtype=np.float32)
    np.testing.assert_allclose(alignment_field(_quant(r), AmNormalizer(scale=c)), [[2.0, 1.0]], rtol=1e-6)


def test_alignment_field_homogeneity(rng):
    r = rng.random((4, 4)).astype(np.float32)
    base = alignment_field(_quant(r), AmNormalizer(scale=0.5))
    np.testing.assert_allclose(alignment_field(_quant(r * 2), AmNormalizer(scale=0.5)), 2 * base, rtol=1e-6)
    np.testing.assert_allclose(alignment_field(_quant(r), AmNormalizer(scale=1.0)), base / 2, rtol=1e-6)


def test_alignment_field_is_pure(rng):
    q = _quant(rng.random((4, 4)))
    norm = AmNormalizer(scale=0.3)
    np.testing.assert_array_equal(alignment_field(q, norm), alignment_field(q, norm))


def test_upsample_nearest_only():
    out = upsample_am(np.array([[1.0, 0.0], [0.0, 0.0]]), 2, selem_radius=0)
    expected = np.zeros((4, 4))
    expected[:2, :2] = 1
    np.testing.assert_array_equal(out, expected)


def test_dilating_a_point_with_radius_one_reaches_its_4_neighbourhood():
    field = np.zeros((5, 5))
    field[2, 2] = 0.8
    out = upsample_am(field, 1, selem_radius=1)
    for r, c in [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)]:
        assert out[r, c] == 0.8
    assert out[1, 1] == 0 and out[3, 3] == 0


def test_default_radius():
    assert default_selem_radius(8) == 4
    assert default_selem_radius(2) == 1
    assert upsample_am(np.zeros((2, 2)), 4).shape == (8, 8)


def test_dilation_is_extensive(rng):
    for _ in range(20):
        field = rng.random((6, 6))
        dilated = upsample_am(field, 4, selem_radius=2)
        assert np.all(dilated >= upsample_am(field, 4, selem_radius=0))


def test_dilation_commutes_with_translation(rng):
    field = np.zeros((10, 10))
    field[3:5, 2:4] = rng.random((2, 2))
    shifted = np.roll(field, (2, 3), axis=(0, 1))
    a = upsample_am(field, 2, selem_radius=2)
    b = upsample_am(shifted, 2, selem_radius=2)
    np.testing.assert_array_equal(np.roll(a, (4, 6), axis=(0, 1)), b)


def test_upsample_rejects_bad_factor():
    with pytest.raises(ConfigurationError):
        upsample_am(np.zeros((2, 2)), 0)


# ---------------------------------------------------------------------
# Pixelwise fusion
# ---------------------------------------------------------------------

def test_fuse_zero_am_gives_zero(rng):
    assert np.all(fuse_pixelwise(rng.random((8, 8)), np.zeros((8, 8))) == 0)


def test_fuse_equal_maps_squares(rng):
    sm = rng.random((8, 8))
    np.testing.assert_allclose(fuse_pixelwise(sm, sm), _minmax(sm) ** 2)


def test_fused_below_both_inputs(rng):
    sm, am = rng.random((8, 8)), rng.random((8, 8)) * 3
    fused = fuse_pixelwise(sm, am)
    assert np.all(fused <= np.minimum(_minmax(sm), _minmax(am)) + 1e-12)


def test_fuse_shape_mismatch():
    with pytest.raises(ShapeError):
        fuse_pixelwise(np.zeros((4, 4)), np.zeros((4, 5)))


# ---------------------------------------------------------------------
# Full composition
# ---------------------------------------------------------------------

def test_compute_anomaly_maps(tiny_model_config, tiny_tiles):
    state = init_model(tiny_model_config)
    recon, q, maps = compute_anomaly_maps(state, tiny_tiles[0], AmNormalizer(scale=0.5))
    assert recon.shape == tiny_tiles[0].shape
    assert q.residuals.shape == (8, 8)
    assert maps.sm.shape == maps.am.shape == (32, 32)
    assert maps.sm.min() >= 0 and maps.sm.max() <= 1
    assert maps.am.min() >= 0
    np.testing.assert_allclose(maps.am.max(), q.residuals.max() / 0.5, rtol=1e-5)
