"""Small input-validation helpers shared across modules."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def require_positive(name: str, value: float, strict: bool = True) -> float:
    value = float(value)
    if not np.isfinite(value) or (value <= 0.0 if strict else value < 0.0):
        bound = "> 0" if strict else ">= 0"
        raise ValidationError(f"{name}: expected a finite value {bound}, got {value!r}")
    return value


def require_int(name: str, value, minimum: int = 0) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValidationError(f"{name}: expected an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name}: expected >= {minimum}, got {value}")
    return int(value)


def as_float_array(name: str, x, ndim: int | None = None, shape=None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite entries")
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name}: expected {ndim}-d array, got ndim={arr.ndim}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValidationError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def require_square(name: str, a: np.ndarray, n: int | None = None) -> np.ndarray:
    a = as_float_array(name, a, ndim=2)
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name}: expected a square matrix, got {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValidationError(f"{name}: expected order {n}, got {a.shape[0]}")
    return a
