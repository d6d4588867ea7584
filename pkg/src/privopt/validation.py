"""Input validation helpers shared across the package."""

import numpy as np


def as_vector(x, dim=None, name="x"):
    """Coerce to a finite 1-D float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    return v


def as_matrix(x, name="X"):
    """Coerce to a finite 2-D float array."""
    m = np.asarray(x, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def check_positive(value, name="value"):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_in_interval(value, lo, hi, name="value", closed_lo=False, closed_hi=True):
    value = float(value)
    ok_lo = value >= lo if closed_lo else value > lo
    ok_hi = value <= hi if closed_hi else value < hi
    if not (np.isfinite(value) and ok_lo and ok_hi):
        lo_b = "[" if closed_lo else "("
        hi_b = "]" if closed_hi else ")"
        raise ValueError(f"{name} must lie in {lo_b}{lo}, {hi}{hi_b}, got {value}")
    return value


def check_X_y(X, y=None):
    """Validate estimator inputs: X is (n, d), y is (n,) or absent."""
    X = as_matrix(X, name="X")
    n = X.shape[0]
    if n == 0:
        raise ValueError("X must contain at least one sample")
    if y is None:
        y = np.zeros(n)
    y = as_vector(y, dim=n, name="y")
    return X, y
