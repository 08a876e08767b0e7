"""Small argument-checking helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_positive(name: str, value) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_nonnegative(name: str, value) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a non-negative finite number, got {value!r}")
    return value


def check_fraction(name: str, value, *, open_low: bool = False) -> float:
    """Validate a ratio in [0, 1] (or (0, 1] when open_low)."""
    value = float(value)
    low_ok = value > 0 if open_low else value >= 0
    if not np.isfinite(value) or not low_ok or value > 1:
        lo = "(0" if open_low else "[0"
        raise ValueError(f"{name} must lie in {lo}, 1], got {value!r}")
    return value


def as_float_grid(name: str, data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    return arr


def check_same_shape(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"{name_a} and {name_b} must share a shape, got {a.shape} vs {b.shape}"
        )


def as_binary_mask(name: str, mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{name} must contain only 0/1 entries")
    return arr.astype(bool)


def check_coords(name: str, coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr
