import numpy as np
import pytest
from skimage import data

from hartleysr.imaging import to_luma

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def astronaut_y():
    """Luma of the public-domain astronaut photo bundled with scikit-image."""
    return to_luma(data.astronaut() / 255.0)


@pytest.fixture(scope="session")
def camera_y():
    return data.camera() / 255.0


def relative_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def central_difference(fn, x, eps):
    """Central finite differences of scalar ``fn()`` w.r.t. every entry of ``x`` (in place)."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps
        up = fn()
        x[idx] = orig - eps
        down = fn()
        x[idx] = orig
        grad[idx] = (up - down) / (2.0 * eps)
    return grad


def natural_crops(images, per_image, size, s=2, seed=0, max_bicubic_psnr=40.0):
    """Random ``size`` x ``size`` luma crops with enough texture to be worth super-resolving.

    Crops on which plain bicubic already exceeds ``max_bicubic_psnr`` (flat
    sky, background) are redrawn.
    """
    from hartleysr.imaging import make_planes, psnr

    rng = np.random.default_rng(seed)
    out = []
    for img in images:
        y = to_luma(np.asarray(img) / 255.0)
        kept = 0
        while kept < per_image:
            r = rng.integers(0, y.shape[0] - size + 1)
            c = rng.integers(0, y.shape[1] - size + 1)
            hr = y[r:r + size, c:c + size]
            lr, _ = make_planes(hr, s, (size, size))
            if psnr(lr, hr) <= max_bicubic_psnr:
                out.append(hr)
                kept += 1
    return out


def train_small_model():
    """A small (L=2, K=2, N=1) 96x96 x2 model trained to generalize a little."""
    from hartleysr.imaging import make_pair
    from hartleysr.network import NetworkArch
    from hartleysr.training import TrainingConfig, train

    names = ["camera", "chelsea", "rocket", "brick", "grass", "coffee"]
    imgs = [getattr(data, n)() for n in names]
    crops = natural_crops(imgs, 7, 96)
    pairs = [make_pair(c, 2, (96, 96)) for c in crops]
    val, tr = pairs[::7], [p for i, p in enumerate(pairs) if i % 7]
    cfg = TrainingConfig(max_iters=300, batch_size=4)
    return train(tr, NetworkArch(2, 2, 1, 96, 96), cfg, validation=val, validate_every=25)


@pytest.fixture(scope="session")
def small_model():
    return train_small_model()


def reference_forward(F1, params, dtype=np.longdouble):
    """Independent forward pass: direct circular sums via rolls, in extended precision.

    Used as the finite-difference oracle for gradient checks, where float64
    round-off in the network output would swamp small gradient entries.
    """
    W, B, C, alpha, W_final = (np.asarray(t, dtype=dtype) for t in params)
    N = (C.shape[-1] - 1) // 2
    F1 = np.asarray(F1, dtype=dtype)
    F = F1
    mixed = np.zeros_like(F1)
    for i in range(W.shape[0]):
        S = np.zeros_like(F1)
        for j in range(W.shape[1]):
            Q = F * W[i, j] + B[i, j]
            for m in range(-N, N + 1):
                for n in range(-N, N + 1):
                    S = S + C[i, j, m + N, n + N] * np.roll(Q, (m, n), axis=(0, 1))
        mixed = mixed + alpha[i] * S
        F = S
    return mixed * W_final + F1


def reference_loss(I_star, I, kind, beta):
    from hartleysr.training import frequency_distance

    diff = I_star - np.asarray(I, dtype=I_star.dtype)
    if kind == "l1":
        return np.sum(np.abs(diff))
    if kind == "l2":
        return np.sum(diff * diff)
    weight = np.exp(np.asarray(beta * frequency_distance(diff.shape), dtype=I_star.dtype))
    return np.sum(weight * diff * diff)
