"""Input validation helpers shared by the estimator-facing modules."""

from __future__ import annotations

import math

import numpy as np

from .mathcore import DomainError

__all__ = [
    "as_points_2d",
    "as_targets_1d",
    "as_point",
    "require_finite",
    "require_positive",
]


def as_points_2d(x) -> np.ndarray:
    """Coerce to a float (m, n) array; 1-D input becomes a single column."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError(f"points must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must be finite")
    return arr


def as_targets_1d(y, n_points: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float).ravel()
    if arr.shape[0] != n_points:
        raise DomainError(f"expected {n_points} targets, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("targets must be finite")
    return arr


def as_point(x, dim: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"point has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point must be finite")
    return arr


def require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def require_positive(name: str, value: float) -> float:
    value = require_finite(name, value)
    if value <= 0.0:
        raise DomainError(f"{name} must be > 0, got {value}")
    return value
