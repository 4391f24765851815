"""Input validation helpers (complex-aware counterparts of sklearn's check_array)."""

import numpy as np


def check_complex(a, name="array", ndim=None, shape=None):
    """Return ``a`` as a finite complex128 ndarray, raising ValueError otherwise."""
    arr = np.asarray(a)
    if arr.dtype.kind not in "biufc":
        raise ValueError(f"{name} must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.complex128, copy=False)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(arr.shape, shape)):
            if want is not None and got != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)} (axis {axis})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_frame(samples, cfg, name="frame"):
    """Validate a time-domain frame against ``cfg`` and return it as complex128."""
    return check_complex(samples, name=name, ndim=1, shape=(cfg.frame_len,))


def check_grid(grid, rows, cols, name="grid"):
    return check_complex(grid, name=name, ndim=2, shape=(rows, cols))


def check_bits(bits, n_bits, name="bits"):
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size != n_bits:
        raise ValueError(f"{name} must be a 1-D vector of {n_bits} bits, got shape {arr.shape}")
    if arr.dtype.kind not in "biu" or np.any((arr != 0) & (arr != 1)):
        raise ValueError(f"{name} must contain only 0/1 integers")
    return arr.astype(np.uint8, copy=False)
