"""Dense float64 array primitives used throughout the package.

Tensors are plain :class:`numpy.ndarray` objects of dtype float64. The helpers
below are the handful of operations the attack and bound code depends on.
"""
import numpy as np


class DegenerateShapeError(ValueError):
    pass


def as_tensor(values, ndim=None):
    """Convert ``values`` to a finite float64 array, optionally checking ndim."""
    arr = np.asarray(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains NaN or Inf")
    return arr


def sign(v):
    # np.sign maps 0 to 0, which keeps x * sign(x) >= 0 and leaves zero-gradient
    # coordinates untouched.
    return np.sign(np.asarray(v, dtype=np.float64))


def inf_norm(W):
    """Maximum absolute row sum of a matrix."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"inf_norm expects a 2-D matrix, got shape {W.shape}")
    if W.size == 0:
        raise DegenerateShapeError("degenerate shape")
    return float(np.abs(W).sum(axis=1).max())


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_sum_exp(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=axis, keepdims=True)
    out = np.log(np.exp(z - m).sum(axis=axis, keepdims=True)) + m
    out = np.squeeze(out, axis=axis)
    return float(out) if out.ndim == 0 else out
