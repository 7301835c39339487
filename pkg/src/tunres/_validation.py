"""Input validation shared by the estimators and the functional API."""

import warnings

import numpy as np
from sklearn.utils import check_array


class DomainError(ValueError):
    """An argument lies outside the model's physical domain."""


class SolverError(RuntimeError):
    """A root bracket did not contain a sign change."""


class TunresWarning(UserWarning):
    pass


def check_1d(x, name="x", dtype=float):
    """Accept shape (n,) or (n, 1) and return a flat float array."""
    arr = np.asarray(x)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = check_array(arr, ensure_2d=False, dtype=dtype, input_name=name)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_xy(x, y, min_points=1, complex_y=False):
    x = check_1d(x, "x")
    y = np.asarray(y).ravel() if complex_y else check_1d(y, "y")
    if complex_y and not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {x.size}")
    return x, (y.astype(complex) if complex_y else y)


def check_ascending(f, name="freq", strict=True):
    d = np.diff(f)
    if (strict and np.any(d <= 0)) or np.any(d < 0):
        raise ValueError(f"{name} must be strictly ascending")
    return f


def check_uniform(x, name="grid", rtol=1e-6):
    d = np.diff(x)
    if d.size and not np.allclose(d, d[0], rtol=rtol, atol=0):
        raise ValueError(f"{name} must be uniformly spaced")
    return x


def warn(message):
    warnings.warn(message, TunresWarning, stacklevel=3)
