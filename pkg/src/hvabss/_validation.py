"""Input validation helpers shared by the estimators and the functional API."""
from __future__ import annotations

import numbers

import numpy as np


def check_spectrogram(x, name: str = "x", allow_2d: bool = False) -> np.ndarray:
    """Return ``x`` as a finite complex array of shape (channels, frames, bins)."""
    x = np.asarray(x)
    if allow_2d and x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3:
        raise ValueError(f"{name} must have shape (channels, frames, bins), got {x.shape}")
    if min(x.shape) < 1:
        raise ValueError(f"{name} has an empty axis: shape {x.shape}")
    if not np.issubdtype(x.dtype, np.complexfloating):
        x = x.astype(complex)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_scalar(value, name: str, *, min_val=None, max_val=None, include_min=True, include_max=True):
    """Validate a real scalar parameter and return it as ``float``."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if min_val is not None:
        if value < min_val or (not include_min and value == min_val):
            bound = ">=" if include_min else ">"
            raise ValueError(f"{name} must be {bound} {min_val}, got {value}")
    if max_val is not None:
        if value > max_val or (not include_max and value == max_val):
            bound = "<=" if include_max else "<"
            raise ValueError(f"{name} must be {bound} {max_val}, got {value}")
    return value


def check_positive_int(value, name: str, *, min_val: int = 1) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < min_val:
        raise ValueError(f"{name} must be >= {min_val}, got {value}")
    return int(value)


def check_finite(x, name: str) -> np.ndarray:
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x
