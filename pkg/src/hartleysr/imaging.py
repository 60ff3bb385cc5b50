"""Image I/O, colour handling, bicubic resampling, pair construction and metrics.

Planes are 2D float64 arrays with nominal range [0, 1]; RGB images are
(rows, cols, 3) arrays.
"""

import time

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from ._validation import check_plane, check_same_shape
from .hartley import dht2
from .network import forward
from .training import TrainingSample

PSNR_IDENTICAL = float("inf")

# BT.601 studio-swing coefficients for [0, 1] inputs, offsets in [0, 1] units.
_YCBCR_MATRIX = np.array([
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
]) / 255.0
_YCBCR_OFFSET = np.array([16.0, 128.0, 128.0]) / 255.0


def rgb_to_ycbcr(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (rows, cols, 3) image, got {img.shape}")
    return img @ _YCBCR_MATRIX.T + _YCBCR_OFFSET


def ycbcr_to_rgb(img):
    img = np.asarray(img, dtype=np.float64)
    return (img - _YCBCR_OFFSET) @ np.linalg.inv(_YCBCR_MATRIX).T


def rgb_to_y(img):
    """BT.601 studio-swing luma: ``16/255 + (65.481 R + 128.553 G + 24.966 B) / 255``."""
    return rgb_to_ycbcr(img)[..., 0]


def to_luma(img):
    """Y plane of an RGB image; grayscale planes pass through unchanged."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    return rgb_to_y(img[..., :3])


def read_image(path):
    """Decode a PNG/PPM/PGM file to floats in [0, 1].

    Returns a 2D plane for grayscale files, (rows, cols, 3) for colour.
    8- and 16-bit integer samples are supported.
    """
    with Image.open(path) as img:
        if img.format not in ("PNG", "PPM"):
            raise ValueError(f"{path}: unsupported container {img.format}")
        if img.mode in ("P", "PA", "LA", "RGBA", "CMYK", "1"):
            img = img.convert("RGBA" if img.mode in ("P", "PA") else "RGB")
            if img.mode == "RGBA":
                img = img.convert("RGB")
        arr = np.array(img)
        mode = img.mode
    if arr.dtype == np.uint8:
        out = arr / 255.0
    elif mode.startswith("I") or arr.dtype == np.uint16:
        out = arr.astype(np.float64) / 65535.0
    else:
        raise ValueError(f"{path}: unsupported sample type {arr.dtype} ({mode})")
    if out.ndim == 3:
        out = out[..., :3]
    return out


def write_png(path, img):
    """Write a plane or RGB image in [0, 1] as an 8-bit PNG."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8)).save(path, format="PNG")


def _cubic(x, a=-0.5):
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def resize_matrix(in_len, out_len):
    """Dense (out_len, in_len) matrix of bicubic interpolation weights.

    Keys kernel with a = -0.5, sample centres mapped by
    ``src = (dst + 0.5) * in/out - 0.5``, out-of-range taps clamped to the
    edge. When shrinking, the kernel is widened by the scale ratio.
    """
    scale = out_len / in_len
    width = 4.0
    if scale < 1.0:
        width /= scale

        def kernel(x):
            return scale * _cubic(scale * x)
    else:
        kernel = _cubic
    centres = (np.arange(out_len) + 0.5) / scale - 0.5
    left = np.floor(centres - width / 2.0).astype(int)
    taps = int(np.ceil(width)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    weights = kernel(centres[:, None] - idx)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_len - 1)
    mat = np.zeros((out_len, in_len))
    np.add.at(mat, (np.repeat(np.arange(out_len), taps), idx.ravel()), weights.ravel())
    return mat


def bicubic_resize(plane, out_rows, out_cols):
    """Separable bicubic resize of a plane (or each channel of an RGB image)."""
    if out_rows < 1 or out_cols < 1:
        raise ValueError(f"output size must be >= 1x1, got {out_rows}x{out_cols}")
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim == 3:
        return np.stack([bicubic_resize(arr[..., c], out_rows, out_cols)
                         for c in range(arr.shape[2])], axis=-1)
    arr = check_plane(arr)
    rows, cols = arr.shape
    if (rows, cols) == (out_rows, out_cols):
        return arr.copy()
    return resize_matrix(rows, out_rows) @ arr @ resize_matrix(cols, out_cols).T


def modcrop(plane, s):
    rows, cols = plane.shape[:2]
    return plane[: rows - rows % s, : cols - cols % s]


def center_crop(plane, rows, cols):
    h, w = plane.shape[:2]
    if h < rows or w < cols:
        raise ValueError(f"image {h}x{w} smaller than crop {rows}x{cols}")
    top, left = (h - rows) // 2, (w - cols) // 2
    return plane[top: top + rows, left: left + cols]


def degrade(hr, s):
    """Bicubic downscale by ``s`` then bicubic upscale back to ``hr``'s size."""
    rows, cols = hr.shape
    if rows % s or cols % s:
        raise ValueError(f"plane {hr.shape} not divisible by scale {s}")
    lr = bicubic_resize(hr, rows // s, cols // s)
    return bicubic_resize(lr, rows, cols)


def make_planes(hr, s, train_dims):
    """Spatial (bicubic input, ground truth) pair of size ``train_dims``."""
    if s < 2:
        raise ValueError(f"upscale factor must be >= 2, got {s}")
    rows, cols = train_dims
    if rows % s or cols % s:
        raise ValueError(f"training size {rows}x{cols} not divisible by scale {s}")
    hr = check_plane(to_luma(hr), "hr")
    crop = center_crop(modcrop(hr, s), rows, cols)
    return degrade(crop, s), crop.copy()


def make_pair(hr, s, train_dims):
    """Training sample ``(dht2(bicubic input), dht2(ground truth))``."""
    lr_up, crop = make_planes(hr, s, train_dims)
    return TrainingSample(dht2(lr_up), dht2(crop))


def _shave(plane, shave):
    if shave:
        return plane[shave:-shave, shave:-shave]
    return plane


def psnr(a, b, peak=1.0, shave=0):
    """``10 log10(peak^2 / MSE)`` in dB; ``inf`` when the planes are equal."""
    a = _shave(check_plane(a, "a"), shave)
    b = _shave(check_plane(b, "b"), shave)
    check_same_shape(a, b, names=("a", "b"))
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * np.log10(peak * peak / mse)


def _gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def ssim(a, b, data_range=1.0, shave=0):
    """Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows."""
    a = _shave(check_plane(a, "a"), shave)
    b = _shave(check_plane(b, "b"), shave)
    check_same_shape(a, b, names=("a", "b"))
    size = 11
    if min(a.shape) < size:
        raise ValueError(f"planes {a.shape} smaller than the {size}x{size} window")
    g = _gaussian_window(size)
    pad = size // 2

    def filt(x):
        y = correlate1d(correlate1d(x, g, axis=0, mode="reflect"), g, axis=1, mode="reflect")
        return y[pad:-pad, pad:-pad]

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def super_resolve_timed(lr_upscaled, params):
    """Enhance one network-sized plane; returns ``(output, stage_ms)``."""
    plane = check_plane(lr_upscaled, "lr_upscaled")
    if plane.shape != params.W_final.shape:
        raise ValueError(f"plane {plane.shape} does not match network {params.W_final.shape}")
    t0 = time.perf_counter()
    F1 = dht2(plane)
    t1 = time.perf_counter()
    I_star, _ = forward(F1, params)
    t2 = time.perf_counter()
    out = np.clip(dht2(I_star), 0.0, 1.0)
    t3 = time.perf_counter()
    stages = {
        "transform_ms": (t1 - t0) * 1e3,
        "net_ms": (t2 - t1) * 1e3,
        "inverse_ms": (t3 - t2) * 1e3,
    }
    return out, stages


def super_resolve(lr_upscaled, params):
    """Residual enhancement of a bicubic-upscaled plane of network size."""
    return super_resolve_timed(lr_upscaled, params)[0]


def _tile_starts(length, tile, overlap):
    if length <= tile:
        return [0]
    step = tile - overlap
    starts = list(range(0, length - tile, step))
    starts.append(length - tile)
    return starts


def _ramp(tile, lead, trail):
    w = np.ones(tile)
    if lead:
        w[:lead] = np.arange(1, lead + 1) / (lead + 1)
    if trail:
        w[tile - trail:] = np.arange(trail, 0, -1) / (trail + 1)
    return w


def super_resolve_tiled(plane, params, overlap=16, return_timing=False):
    """Enhance a plane of any size with overlapping network-sized tiles.

    Tiles step by ``tile - overlap``; overlapping bands are blended with
    linear ramps. Planes smaller than a tile are edge-padded and cropped back.
    """
    plane = check_plane(plane)
    tile_r, tile_c = params.W_final.shape
    if overlap < 0 or 2 * overlap >= min(tile_r, tile_c):
        raise ValueError(f"overlap must be in [0, {min(tile_r, tile_c) // 2}), got {overlap}")
    rows, cols = plane.shape
    pad_r, pad_c = max(tile_r - rows, 0), max(tile_c - cols, 0)
    work = np.pad(plane, ((0, pad_r), (0, pad_c)), mode="edge") if pad_r or pad_c else plane
    R, C = work.shape

    timing = {"transform_ms": 0.0, "net_ms": 0.0, "inverse_ms": 0.0}
    t_start = time.perf_counter()
    rs, cs = _tile_starts(R, tile_r, overlap), _tile_starts(C, tile_c, overlap)
    if len(rs) == 1 and len(cs) == 1:
        out, stages = super_resolve_timed(work, params)
        for k in timing:
            timing[k] += stages[k]
    else:
        acc = np.zeros((R, C))
        wsum = np.zeros((R, C))
        for a, r0 in enumerate(rs):
            lead_r = rs[a - 1] + tile_r - r0 if a > 0 else 0
            trail_r = r0 + tile_r - rs[a + 1] if a + 1 < len(rs) else 0
            wr = _ramp(tile_r, lead_r, trail_r)
            for b, c0 in enumerate(cs):
                lead_c = cs[b - 1] + tile_c - c0 if b > 0 else 0
                trail_c = c0 + tile_c - cs[b + 1] if b + 1 < len(cs) else 0
                wc = _ramp(tile_c, lead_c, trail_c)
                tile_out, stages = super_resolve_timed(
                    work[r0:r0 + tile_r, c0:c0 + tile_c], params)
                for k in timing:
                    timing[k] += stages[k]
                w = np.outer(wr, wc)
                acc[r0:r0 + tile_r, c0:c0 + tile_c] += w * tile_out
                wsum[r0:r0 + tile_r, c0:c0 + tile_c] += w
        out = acc / wsum
    out = out[:rows, :cols]
    timing["total_ms"] = (time.perf_counter() - t_start) * 1e3
    if return_timing:
        return out, timing
    return out
