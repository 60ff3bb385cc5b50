import numpy as np
import pytest
from PIL import Image
from skimage.color import rgb2ycbcr
from skimage.metrics import structural_similarity

from hartleysr.hartley import dht2
from hartleysr.imaging import (PSNR_IDENTICAL, bicubic_resize, center_crop, degrade, make_pair,
                               make_planes, modcrop, psnr, read_image, resize_matrix, rgb_to_y,
                               rgb_to_ycbcr, ssim, super_resolve, super_resolve_tiled,
                               super_resolve_timed, write_png, ycbcr_to_rgb)
from hartleysr.network import NetworkArch, init_params
from hartleysr.training import frequency_distance

# frozen: 4x4 ramp up x2 then down x2, max abs error
RAMP_ROUNDTRIP_ERROR = 0.02020263671875
# frozen: measured 4.04e-3 for the small fixture model on a 300x250 astronaut region
TILE_OVERLAP_BOUND = 5e-3


def zero_residual(shape=(16, 16), L=1, K=1, N=1):
    p = init_params(NetworkArch(L, K, N, *shape))
    p.alpha[:] = 0.0
    return p


# colour

@pytest.mark.parametrize("rgb, expected", [
    ((0, 0, 0), 16 / 255),
    ((1, 1, 1), 235 / 255),
    ((1, 0, 0), 16 / 255 + 65.481 / 255),
])
def test_rgb_to_y_values(rgb, expected):
    img = np.array(rgb, dtype=float).reshape(1, 1, 3)
    assert rgb_to_y(img)[0, 0] == pytest.approx(expected, abs=1e-12)


def test_rgb_to_ycbcr_matches_reference():
    img = np.random.default_rng(0).random((7, 5, 3))
    np.testing.assert_allclose(rgb_to_ycbcr(img), rgb2ycbcr(img) / 255.0, atol=1e-12)
    np.testing.assert_allclose(ycbcr_to_rgb(rgb_to_ycbcr(img)), img, atol=1e-12)


def test_rgb_to_y_rejects_gray():
    with pytest.raises(ValueError):
        rgb_to_y(np.zeros((4, 4)))


# resampling

def test_resize_identity_and_constant():
    p = np.random.default_rng(1).random((9, 7))
    np.testing.assert_allclose(bicubic_resize(p, 9, 7), p, atol=1e-12)
    for shape in [(18, 14), (3, 2), (13, 29)]:
        np.testing.assert_allclose(bicubic_resize(np.full((9, 7), 0.4), *shape), 0.4, atol=1e-12)


def test_resize_matrix_rows_sum_to_one():
    for n_in, n_out in [(5, 10), (10, 5), (7, 3), (4, 9)]:
        np.testing.assert_allclose(resize_matrix(n_in, n_out).sum(axis=1), 1.0, atol=1e-12)


def test_ramp_roundtrip_regression():
    ramp = np.add.outer(np.arange(4.0), np.arange(4.0)) / 6.0
    err = np.abs(bicubic_resize(bicubic_resize(ramp, 8, 8), 4, 4) - ramp).max()
    assert err == pytest.approx(RAMP_ROUNDTRIP_ERROR, abs=1e-12)


@pytest.mark.parametrize("shape", [(80, 60), (20, 15), (57, 41)])
def test_resize_matches_pillow_away_from_borders(astronaut_y, shape):
    # Pillow renormalises truncated taps instead of clamping, so borders differ
    p = astronaut_y[100:140, 200:230]
    ref = Image.fromarray(p.astype(np.float32), mode="F").resize(shape[::-1], Image.BICUBIC)
    diff = np.abs(bicubic_resize(p, *shape) - np.asarray(ref, dtype=np.float64))
    assert diff[4:-4, 4:-4].max() < 1e-6


def test_resize_rgb_per_channel():
    img = np.random.default_rng(2).random((6, 8, 3))
    out = bicubic_resize(img, 12, 16)
    assert out.shape == (12, 16, 3)
    np.testing.assert_allclose(out[..., 1], bicubic_resize(img[..., 1], 12, 16))


def test_crops():
    p = np.arange(70.0).reshape(7, 10)
    assert modcrop(p, 3).shape == (6, 9)
    c = center_crop(p, 3, 4)
    assert c.shape == (3, 4) and c[0, 0] == p[2, 3]
    with pytest.raises(ValueError):
        center_crop(p, 8, 4)
    with pytest.raises(ValueError):
        degrade(np.ones((5, 4)), 2)


# training pairs

def test_make_pair_constant_is_dc_only():
    pair = make_pair(np.full((40, 40), 0.3), 2, (16, 16))
    for F in (pair.input_freq, pair.target_freq):
        assert F[0, 0] == pytest.approx(0.3 * 16)
        assert np.abs(F.ravel()[1:]).max() < 1e-12
    assert np.abs(pair.target_freq - pair.input_freq).max() < 1e-12


def test_make_pair_rejects_bad_scale():
    with pytest.raises(ValueError):
        make_pair(np.ones((32, 32)), 1, (16, 16))
    with pytest.raises(ValueError):
        make_pair(np.ones((32, 32)), 3, (16, 16))


def test_make_pair_residual_sits_away_from_dc(astronaut_y):
    pair = make_pair(center_crop(astronaut_y, 96, 96), 2, (96, 96))
    energy = ((pair.target_freq - pair.input_freq) ** 2).ravel()
    order = np.argsort(frequency_distance((96, 96)).ravel(), kind="stable")
    quarter = energy.size // 4
    assert energy.sum() > 0
    assert energy[order[:quarter]].sum() < energy[order[quarter:]].sum()


def test_make_planes_matches_pair(astronaut_y):
    lr, hr = make_planes(astronaut_y, 2, (32, 32))
    pair = make_pair(astronaut_y, 2, (32, 32))
    np.testing.assert_array_equal(dht2(lr), pair.input_freq)
    np.testing.assert_array_equal(dht2(hr), pair.target_freq)


# metrics

def test_psnr_values():
    a = np.random.default_rng(0).random((8, 8))
    assert psnr(a, a) == PSNR_IDENTICAL
    assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.1)) == pytest.approx(20.0)
    b = a.copy()
    b[0, 0] += 1.0
    assert psnr(a, b, shave=1) == PSNR_IDENTICAL


def test_psnr_symmetric():
    a, b = np.random.default_rng(1).random((2, 9, 9))
    assert psnr(a, b) == psnr(b, a)


def test_ssim_values():
    a = np.random.default_rng(0).random((20, 20))
    assert ssim(a, a) == 1.0
    assert ssim(a, 1 - a) < 1.0
    with pytest.raises(ValueError):
        ssim(np.ones((8, 8)), np.ones((8, 8)))


def test_ssim_matches_reference(astronaut_y):
    a = astronaut_y[50:130, 60:150]
    b = degrade(a, 2)
    ref = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-12)


# inference

def test_super_resolve_zero_residual_is_identity():
    p = np.random.default_rng(3).random((16, 16)) * 1.2 - 0.1
    out, stages = super_resolve_timed(p, zero_residual())
    np.testing.assert_allclose(out, np.clip(p, 0, 1), atol=1e-12)
    assert set(stages) == {"transform_ms", "net_ms", "inverse_ms"}
    with pytest.raises(ValueError):
        super_resolve(np.ones((8, 8)), zero_residual())


def test_tiled_network_sized_equals_single(small_model, astronaut_y):
    p = astronaut_y[:96, :96]
    assert np.array_equal(super_resolve_tiled(p, small_model), super_resolve(p, small_model))


def test_tiled_constant_plane():
    out = super_resolve_tiled(np.full((50, 37), 0.6), zero_residual(), overlap=4)
    np.testing.assert_allclose(out, 0.6, atol=1e-12)


def test_tiled_small_plane_is_padded():
    p = np.random.default_rng(4).random((10, 7))
    out, timing = super_resolve_tiled(p, zero_residual(), overlap=4, return_timing=True)
    np.testing.assert_allclose(out, p, atol=1e-12)
    assert set(timing) == {"transform_ms", "net_ms", "inverse_ms", "total_ms"}


def test_tiled_overlap_validation():
    with pytest.raises(ValueError):
        super_resolve_tiled(np.ones((40, 40)), zero_residual(), overlap=8)
    with pytest.raises(ValueError):
        super_resolve_tiled(np.ones((40, 40)), zero_residual(), overlap=-1)


def test_tiled_overlap_insensitivity(small_model, astronaut_y):
    hr = modcrop(astronaut_y, 2)[:300, :250]
    plane = bicubic_resize(degrade(hr, 2), 300, 250)
    a = super_resolve_tiled(plane, small_model, overlap=16)
    b = super_resolve_tiled(plane, small_model, overlap=32)
    assert np.abs(a - b).mean() < TILE_OVERLAP_BOUND


# files

def test_png_roundtrip(tmp_path):
    img = np.random.default_rng(5).integers(0, 256, (6, 9, 3)) / 255.0
    write_png(tmp_path / "a.png", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.png"), img)
    write_png(tmp_path / "g.png", img[..., 0])
    assert read_image(tmp_path / "g.png").shape == (6, 9)


def test_read_16bit_and_ppm(tmp_path):
    arr = np.array([[0, 65535], [1000, 30000]], dtype=np.uint16)
    Image.fromarray(arr).save(tmp_path / "d.png")
    np.testing.assert_allclose(read_image(tmp_path / "d.png"), arr / 65535.0)
    rgb = np.random.default_rng(6).integers(0, 256, (4, 5, 3)).astype(np.uint8)
    Image.fromarray(rgb).save(tmp_path / "c.ppm")
    np.testing.assert_array_equal(read_image(tmp_path / "c.ppm"), rgb / 255.0)


def test_read_rejects_other_containers(tmp_path):
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "x.bmp")
    with pytest.raises(ValueError):
        read_image(tmp_path / "x.bmp")
