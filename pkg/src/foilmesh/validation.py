"""Input checks shared by the estimator and the pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import InsufficientInputError


def check_points(X, min_points: int = 1, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite float64 array of shape ``(n, 3)``."""
    try:
        arr = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True,
                          ensure_min_samples=1, input_name=name)
    except ValueError as exc:
        raise InsufficientInputError(str(exc)) from None
    if arr.shape[1] != 3:
        raise InsufficientInputError(f"{name} must have 3 columns, got {arr.shape[1]}")
    if len(arr) < min_points:
        raise InsufficientInputError(f"{name} needs at least {min_points} points, got {len(arr)}")
    return arr
