"""Input validation helpers used at public API boundaries."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def as_float_matrix(a, name, shape=None):
    """Return ``a`` as a finite 2-D float64 array, optionally checking its shape."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if shape is not None and arr.shape != tuple(shape):
        raise InvalidInputError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_float_vector(a, name, length=None):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if length is not None and arr.shape[0] != length:
        raise InvalidInputError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise InvalidInputError(f"{name} must be a finite nonnegative real, got {value!r}")
    return value


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInputError(f"{name} must be a finite positive real, got {value!r}")
    return value


def check_symmetric(a, name, rtol=1e-10):
    """Raise unless ``a`` is square and symmetric to ``rtol`` relative Frobenius."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    if np.linalg.norm(a - a.T) > rtol * scale:
        raise InvalidInputError(f"{name} is not symmetric to relative tolerance {rtol:g}")


def symmetrize(a):
    return 0.5 * (a + a.T)
