"""Input-validation helpers and deterministic RNG streams.

The estimators accept plain array-likes; these helpers coerce and check them
once at the public boundary so the numerical code can assume clean float64
matrices and integer label vectors.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyDataError, InsufficientDataError, ParameterError

__all__ = [
    "as_matrix",
    "as_labels",
    "check_fraction",
    "check_positive",
    "check_count",
    "rng_stream",
    "stratified_fold_indices",
]


def as_matrix(X, *, allow_nan: bool = False, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a 2-D float64 array and validate its contents."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyDataError(f"{name} has no rows")
    if not allow_nan and not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or infinite values")
    return arr


def as_labels(y, n_rows: int | None = None) -> np.ndarray:
    """Coerce ``y`` to a 1-D int64 label vector with non-negative entries."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ParameterError(f"labels must be 1-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyDataError("label vector is empty")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ParameterError("labels must be integers")
        arr = arr.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ParameterError("labels must be non-negative")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ParameterError(f"label count {arr.shape[0]} does not match row count {n_rows}")
    return arr


def check_fraction(name: str, value: float, *, inclusive_low: bool = False,
                   inclusive_high: bool = False) -> float:
    """Validate that ``value`` lies in (0, 1), with optional closed ends."""
    value = float(value)
    low_ok = value >= 0.0 if inclusive_low else value > 0.0
    high_ok = value <= 1.0 if inclusive_high else value < 1.0
    if not (low_ok and high_ok):
        lo = "[0" if inclusive_low else "(0"
        hi = "1]" if inclusive_high else "1)"
        raise ParameterError(f"{name} must be in {lo}, {hi}, got {value}")
    return value


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0.0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return value


def check_count(name: str, value: int, *, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


def require_both_classes(y: np.ndarray, context: str) -> None:
    """Raise unless ``y`` contains both class 0 and class 1."""
    present = np.unique(y)
    if not (0 in present and 1 in present):
        raise InsufficientDataError(f"{context} requires both classes, found labels {present.tolist()}")


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *path)``.

    Streams for distinct paths are statistically independent, so concurrent
    workers drawing from pre-split streams reproduce the sequential result.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(p) for p in path]]))


def stratified_fold_indices(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified partition of row indices into ``k`` folds.

    Each class is shuffled and dealt round-robin, so folds are disjoint,
    exhaustive, and class-balanced within one row.
    """
    y = np.asarray(y)
    k = check_count("k", k, minimum=2)
    rng = rng_stream(seed, 0xCF01D, k)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        cls_idx = rng.permutation(np.flatnonzero(y == cls))
        for pos, row in enumerate(cls_idx):
            folds[pos % k].append(int(row))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]
