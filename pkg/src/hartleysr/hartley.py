"""Orthonormal 2D discrete Hartley transform.

Frequency maps and image planes are plain 2D float64 arrays with the DC
coefficient at index ``(0, 0)``. The transform uses the ``1/sqrt(R*C)``
normalization on every application, so it is its own inverse and preserves
the sum of squares.
"""

import numpy as np

from ._validation import check_plane

ORACLE_MAX_SIZE = 64


def dht2(plane):
    """Orthonormal 2D DHT, ``T(u,v) = sum f(x,y) cas(2pi(ux/R + vy/C)) / sqrt(RC)``.

    Computed as ``Re - Im`` of the orthonormal FFT, which handles any
    (non power of two) shape. Applying it twice returns the input.
    """
    f = check_plane(plane)
    spec = np.fft.fft2(f, norm="ortho")
    return spec.real - spec.imag


def idht2(freq):
    """Inverse transform; identical to :func:`dht2` under this normalization."""
    return dht2(freq)


def dht2_oracle(plane):
    """Direct double-summation DHT, quartic cost. Reference for tests only."""
    f = check_plane(plane)
    rows, cols = f.shape
    if rows > ORACLE_MAX_SIZE or cols > ORACLE_MAX_SIZE:
        raise ValueError(
            f"oracle limited to {ORACLE_MAX_SIZE}x{ORACLE_MAX_SIZE}, got {f.shape}"
        )
    x = np.arange(rows)
    y = np.arange(cols)
    out = np.empty((rows, cols))
    for u in range(rows):
        for v in range(cols):
            arg = 2.0 * np.pi * (np.outer(u * x / rows, np.ones(cols))
                                 + np.outer(np.ones(rows), v * y / cols))
            out[u, v] = np.sum(f * (np.cos(arg) + np.sin(arg)))
    return out / np.sqrt(rows * cols)


def fourier_parts(plane):
    """Real and imaginary parts of the orthonormal 2D DFT.

    Uses the ``exp(-2 pi i ...)`` forward sign, for which
    ``dht2(f) == real - imag`` holds entrywise.
    """
    f = check_plane(plane)
    spec = np.fft.fft2(f, norm="ortho")
    return spec.real.copy(), spec.imag.copy()


def circular_convolve(f, g):
    """Circular 2D convolution by direct summation (test oracle)."""
    f = check_plane(f, "f")
    g = check_plane(g, "g")
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    rows, cols = f.shape
    out = np.zeros_like(f)
    for m in range(rows):
        for n in range(cols):
            out += f[m, n] * np.roll(np.roll(g, m, axis=0), n, axis=1)
    return out


def is_even_symmetric(g, atol=0.0):
    """True if ``g(x, y) == g(-x mod R, -y mod C)``."""
    g = np.asarray(g, dtype=np.float64)
    mirrored = np.roll(np.flip(g, axis=(0, 1)), 1, axis=(0, 1))
    return bool(np.allclose(g, mirrored, rtol=0.0, atol=atol))


def even_symmetrize(g):
    """Project ``g`` onto the even-symmetric planes: ``(g + mirror(g)) / 2``."""
    g = check_plane(g)
    return 0.5 * (g + np.roll(np.flip(g, axis=(0, 1)), 1, axis=(0, 1)))


def hartley_conv_check(f, g_even):
    """Max entrywise error of the product form of the convolution theorem.

    For even-symmetric ``g`` the DHT of a circular convolution reduces to
    ``sqrt(RC) * dht2(f) * dht2(g)``. The general (non-even) case needs a
    four-term combination and is not checked here.
    """
    f = check_plane(f, "f")
    g = check_plane(g_even, "g_even")
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    scale = np.max(np.abs(g)) if g.size else 0.0
    if not is_even_symmetric(g, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("g_even is not even-symmetric under circular reflection")
    lhs = dht2(circular_convolve(f, g))
    rhs = np.sqrt(f.size) * dht2(f) * dht2(g)
    return float(np.max(np.abs(lhs - rhs)))
