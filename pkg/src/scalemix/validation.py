"""Input validation helpers shared across the package.

Small, explicit checks that raise ``ValueError`` with the offending name in
the message. They return the validated (possibly converted) value so calls
can be chained at function entry.
"""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str, ndim: int | None = None, allow_nan: bool = False):
    """Convert ``x`` to a float ndarray and validate dimensionality.

    Parameters
    ----------
    x : array_like
        Input to convert.
    name : str
        Name used in error messages.
    ndim : int, optional
        Required number of dimensions.
    allow_nan : bool, default False
        Whether NaN entries are permitted (used for data matrices where NaN
        marks a missing observation). Infinities are never permitted.

    Returns
    -------
    ndarray of float
    """
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if allow_nan:
        if np.isinf(arr).any():
            raise ValueError(f"{name} contains infinite values")
    elif not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name: str, allow_zero: bool = False) -> float:
    """Validate a positive (or nonnegative) scalar and return it as float."""
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if allow_zero:
        if value < 0:
            raise ValueError(f"{name} must be >= 0, got {value}")
    elif value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


def check_in_interval(
    value,
    name: str,
    low: float,
    high: float,
    low_open: bool = False,
    high_open: bool = False,
) -> float:
    """Validate that a scalar lies in the given interval and return it."""
    value = float(value)
    lo_ok = value > low if low_open else value >= low
    hi_ok = value < high if high_open else value <= high
    if not (np.isfinite(value) and lo_ok and hi_ok):
        lb = "(" if low_open else "["
        rb = ")" if high_open else "]"
        raise ValueError(f"{name} must lie in {lb}{low}, {high}{rb}, got {value}")
    return value


def check_probability(value, name: str, open_interval: bool = False) -> float:
    """Validate a probability, optionally restricted to the open unit interval."""
    return check_in_interval(value, name, 0.0, 1.0, low_open=open_interval, high_open=open_interval)


def check_correlation_matrix(sigma, name: str = "sigma") -> np.ndarray:
    """Validate a correlation matrix: square, symmetric, unit diagonal."""
    sigma = as_float_array(sigma, name, ndim=2)
    d0, d1 = sigma.shape
    if d0 != d1:
        raise ValueError(f"{name} must be square, got shape {sigma.shape}")
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if not np.allclose(np.diag(sigma), 1.0, atol=1e-12):
        raise ValueError(f"{name} must have unit diagonal")
    return sigma


def check_indices(indices, name: str, dim: int) -> np.ndarray:
    """Validate a nonempty, duplicate-free index subset of ``range(dim)``."""
    idx = np.asarray(indices, dtype=int)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d index set")
    if idx.min() < 0 or idx.max() >= dim:
        raise ValueError(f"{name} entries must lie in [0, {dim})")
    if np.unique(idx).size != idx.size:
        raise ValueError(f"{name} contains duplicate indices")
    return idx
