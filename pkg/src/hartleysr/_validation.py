"""Input validation helpers shared by the public API."""

import numpy as np


def check_plane(x, name="plane"):
    """Return ``x`` as a finite 2D float64 array or raise ``ValueError``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_planes(X, name="X"):
    """Validate a stack of equally sized planes, shape (n_samples, rows, cols)."""
    if isinstance(X, (list, tuple)):
        X = [check_plane(x, f"{name}[{i}]") for i, x in enumerate(X)]
        shapes = {x.shape for x in X}
        if len(shapes) > 1:
            raise ValueError(f"{name} planes differ in shape: {sorted(shapes)}")
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ValueError(f"{name} must have shape (n_samples, rows, cols), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(*arrays, names=None):
    shapes = [np.shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        label = ", ".join(names) if names else "inputs"
        raise ValueError(f"shape mismatch between {label}: {shapes}")
