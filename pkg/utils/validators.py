"""
Validation helpers for solver arguments.
"""
import math
from typing import Sequence, Tuple, Union

import numpy as np

from utils.exceptions import InvalidParameter, DimensionMismatch

Point = Union[float, Tuple[float, float], np.ndarray]


def validate_positive(name: str, value: float) -> float:
    """
    Validate a strictly positive, finite real parameter.

    Args:
        name: Parameter name (for the error context)
        value: Value to check

    Returns:
        The value as float
    """
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a real number", {name: value})
    if not math.isfinite(value) or value <= 0:
        raise InvalidParameter(f"{name} must be positive and finite", {name: value})
    return value


def validate_nonzero(name: str, value: float) -> float:
    """Validate a finite, nonzero real coupling."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a real number", {name: value})
    if not math.isfinite(value) or value == 0.0:
        raise InvalidParameter(f"{name} must be finite and nonzero", {name: value})
    return value


def validate_point(point: Point, dimension: int) -> Union[float, np.ndarray]:
    """
    Normalize a point to the representation used by a problem.

    One-dimensional points are floats, two-dimensional points are
    length-2 float arrays.
    """
    if dimension == 1:
        arr = np.asarray(point, dtype=float)
        if arr.size != 1:
            raise DimensionMismatch("expected a scalar point", {"dimension": dimension})
        return float(arr.reshape(-1)[0])
    arr = np.asarray(point, dtype=float).reshape(-1)
    if arr.size != dimension:
        raise DimensionMismatch(
            f"expected a point with {dimension} coordinates",
            {"dimension": dimension, "size": int(arr.size)}
        )
    return arr


def validate_window(window: Sequence[float]) -> Tuple[float, float]:
    """Validate an energy window (Emin, Emax) with Emin < Emax."""
    if len(window) != 2:
        raise InvalidParameter("window must be a pair (Emin, Emax)", {"window": list(window)})
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise InvalidParameter("window must satisfy Emin < Emax", {"window": [lo, hi]})
    return lo, hi


def validate_tolerance(tol: float) -> float:
    """Validate a positive tolerance below one."""
    tol = validate_positive("tol", tol)
    if tol >= 1:
        raise InvalidParameter("tol must be below 1", {"tol": tol})
    return tol
