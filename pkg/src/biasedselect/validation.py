"""Input checking helpers shared by the solvers, samplers and estimators."""

import numpy as np

from .exceptions import ValidationError


def check_utilities(w, *, name="utilities", nonnegative=True):
    """Return ``w`` as a 1-d float64 array, rejecting NaN/inf and negatives."""
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if nonnegative and arr.size and arr.min() < 0:
        raise ValidationError(f"{name} must be non-negative")
    return arr


def check_count(n, *, name="n", low=0, high=None):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        else:
            raise ValidationError(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if n < low or (high is not None and n > high):
        bounds = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise ValidationError(f"{name}={n} outside {bounds}")
    return n


def check_memberships(X):
    """Coerce a membership matrix (items x groups) of 0/1 entries to bool."""
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ValidationError(f"membership matrix must be 2-d, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValidationError("membership matrix has no items")
    if arr.shape[1] == 0:
        raise ValidationError("membership matrix has no groups (p = 0)")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError("membership entries must be 0 or 1")
    return arr.astype(bool)


def check_probability(q, *, name="q"):
    arr = np.asarray(q, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return arr


def check_open_unit(x, *, name):
    x = float(x)
    if not 0 < x < 1:
        raise ValidationError(f"{name} must lie in (0, 1), got {x}")
    return x
