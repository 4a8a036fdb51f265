"""Exceptions and small input-checking helpers shared across modules."""

from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """Input data or arguments violate a documented precondition."""


class NumericalError(RuntimeError):
    """A numerical routine failed (e.g. eigen solver did not converge)."""


def as_float_matrix(x, name: str = "X") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_float_vector(x, name: str = "series", allow_nan: bool = False) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    bad = np.isinf(arr) if allow_nan else ~np.isfinite(arr)
    if np.any(bad):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_day(t: int, n_days: int) -> int:
    """Validate a 1-based day index and return the 0-based array offset."""
    if not isinstance(t, (int, np.integer)) or isinstance(t, bool):
        raise ValidationError(f"day index must be an integer, got {t!r}")
    if not 1 <= t <= n_days:
        raise ValidationError(f"day index {t} out of range [1, {n_days}]")
    return int(t) - 1


def check_window(t_start: int, t_end: int, n_days: int) -> tuple[int, int]:
    """Validate a closed 1-based window and return a 0-based half-open slice."""
    if not 1 <= t_start <= t_end <= n_days:
        raise ValidationError(
            f"window [{t_start}, {t_end}] must satisfy 1 <= start <= end <= {n_days}"
        )
    return int(t_start) - 1, int(t_end)
