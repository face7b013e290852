"""Input validation helpers.

Small check_* utilities in the spirit of sklearn's validation module, kept
local so core modules stay numpy-only. All helpers return float64 arrays
and raise ValueError with the offending argument named.
"""

import numpy as np


def as_vector(x, name, min_len=0):
    """Coerce to a 1-D float64 array of length >= min_len."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_len:
        raise ValueError(f"{name} must have at least {min_len} entries, got {arr.shape[0]}")
    return arr


def as_matrix(x, name, min_rows=0):
    """Coerce to a 2-D float64 array with at least min_rows rows."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValueError(f"{name} must have at least {min_rows} rows, got {arr.shape[0]}")
    return arr


def check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def check_length(x, n, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"{name} must be a length-{n} vector, got shape {arr.shape}")
    return arr


def frozen(arr):
    """Mark an array read-only; returned containers are shared immutably."""
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr
