"""Phase 1 preprocessing: sparse-row dropping, imputation, one-hot encoding,
SMOTE balancing, and attack-ratio resampling.

Every operation is pure (dataset in, new dataset out) and deterministic for
a given seed, so preprocessing jobs can run concurrently without shared
state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDataError,
    InsufficientDataError,
    ParameterError,
    ResampleError,
    UnimputableColumnError,
)
from .flowdata import CATEGORICAL, ColumnSpec, FlowDataset
from .validation import check_count, check_fraction, rng_stream

__all__ = [
    "PreprocessReport",
    "EncoderState",
    "drop_sparse_rows",
    "impute",
    "encode_categorical",
    "smote_balance",
    "resample_to_attack_ratio",
]


@dataclass
class PreprocessReport:
    """Evidence trail of what preprocessing changed."""

    rows_dropped: int = 0
    cells_imputed_mean: int = 0
    cells_imputed_mode: int = 0
    columns_added_by_encoding: int = 0
    unseen_categories: int = 0
    class_counts_before: tuple[int, int] | None = None
    class_counts_after: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "rows_dropped": self.rows_dropped,
            "cells_imputed_mean": self.cells_imputed_mean,
            "cells_imputed_mode": self.cells_imputed_mode,
            "columns_added_by_encoding": self.columns_added_by_encoding,
            "unseen_categories": self.unseen_categories,
            "class_counts_before": list(self.class_counts_before) if self.class_counts_before else None,
            "class_counts_after": list(self.class_counts_after) if self.class_counts_after else None,
        }

    @staticmethod
    def combine(reports: list["PreprocessReport"]) -> "PreprocessReport":
        out = PreprocessReport()
        for rep in reports:
            out.rows_dropped += rep.rows_dropped
            out.cells_imputed_mean += rep.cells_imputed_mean
            out.cells_imputed_mode += rep.cells_imputed_mode
            out.columns_added_by_encoding += rep.columns_added_by_encoding
            out.unseen_categories += rep.unseen_categories
            if rep.class_counts_before is not None and out.class_counts_before is None:
                out.class_counts_before = rep.class_counts_before
            if rep.class_counts_after is not None:
                out.class_counts_after = rep.class_counts_after
        return out


@dataclass(frozen=True)
class EncoderState:
    """Per-column category lists frozen at fit time (first-appearance order)."""

    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {name: list(cats) for name, cats in sorted(self.categories.items())}

    @classmethod
    def from_dict(cls, doc: dict) -> "EncoderState":
        return cls(categories={str(k): tuple(str(c) for c in v) for k, v in doc.items()})


def drop_sparse_rows(ds: FlowDataset, max_missing_fraction: float = 0.30) -> tuple[FlowDataset, PreprocessReport]:
    """Remove rows whose missing-cell fraction exceeds the threshold.

    The boundary is inclusive: a row missing exactly the threshold fraction
    survives. Row order is otherwise preserved.
    """
    frac = check_fraction("max_missing_fraction", max_missing_fraction,
                          inclusive_low=True, inclusive_high=True)
    if ds.n_features == 0:
        return ds, PreprocessReport()
    missing_frac = ds.missing_mask().sum(axis=1) / ds.n_features
    keep = missing_frac <= frac + 1e-12
    n_dropped = int(np.sum(~keep))
    if n_dropped == 0:
        return ds, PreprocessReport()
    if not np.any(keep):
        raise EmptyDataError("every row exceeds the missing-data threshold")
    out = ds.take_rows(np.flatnonzero(keep))
    return out, PreprocessReport(rows_dropped=n_dropped)


def impute(ds: FlowDataset) -> tuple[FlowDataset, PreprocessReport]:
    """Fill absent cells: column mean for continuous columns, most frequent
    category for categorical ones (ties broken toward the lexicographically
    smallest category text).
    """
    missing = ds.missing_mask()
    if not missing.any():
        return ds, PreprocessReport()

    values = np.array(ds.values)
    report = PreprocessReport()
    for j, col in enumerate(ds.feature_columns):
        gap = missing[:, j]
        if not gap.any():
            continue
        present = values[~gap, j]
        if present.size == 0:
            raise UnimputableColumnError(f"column {col.name!r} has no observed values")
        if col.kind == CATEGORICAL:
            idx, counts = np.unique(present.astype(np.int64), return_counts=True)
            ranked = sorted(zip(idx, counts), key=lambda ic: (-ic[1], col.categories[ic[0]]))
            values[gap, j] = float(ranked[0][0])
            report.cells_imputed_mode += int(gap.sum())
        else:
            values[gap, j] = float(np.mean(present))
            report.cells_imputed_mean += int(gap.sum())
    return ds.replace(values=values), report


def encode_categorical(ds: FlowDataset, enc: EncoderState | None = None) -> tuple[FlowDataset, EncoderState]:
    """One-hot encode every categorical column.

    With ``enc=None`` the category lists are frozen from the dataset itself
    (fit mode). With a supplied encoder (transform mode) categories unseen at
    fit time map to the all-zero vector; their count lands in
    ``meta['unseen_categories']``. Continuous columns pass through untouched.
    """
    cat_cols = [c for c in ds.feature_columns if c.kind == CATEGORICAL]
    if not cat_cols:
        return ds, enc if enc is not None else EncoderState()

    if enc is None:
        enc = EncoderState(categories={c.name: tuple(c.categories) for c in cat_cols})

    new_columns: list[ColumnSpec] = []
    blocks: list[np.ndarray] = []
    unseen = 0
    for j, col in enumerate(ds.feature_columns):
        col_vals = ds.values[:, j]
        if col.kind != CATEGORICAL:
            new_columns.append(col)
            blocks.append(col_vals.reshape(-1, 1))
            continue
        if col.name not in enc.categories:
            raise ParameterError(f"encoder has no category list for column {col.name!r}")
        frozen = enc.categories[col.name]
        block = np.zeros((ds.n_rows, len(frozen)), dtype=np.float64)
        for r in range(ds.n_rows):
            v = col_vals[r]
            if math.isnan(v):
                unseen += 1
                continue
            text = col.categories[int(v)]
            try:
                block[r, frozen.index(text)] = 1.0
            except ValueError:
                unseen += 1
        blocks.append(block)
        new_columns.extend(ColumnSpec(f"{col.name}={cat}") for cat in frozen)

    new_columns.append(ds.label_column)
    values = np.hstack(blocks) if blocks else np.empty((ds.n_rows, 0))
    meta = dict(ds.meta)
    meta["unseen_categories"] = unseen
    out = FlowDataset(columns=tuple(new_columns), values=values, labels=ds.labels, meta=meta)
    return out, enc


# -- resampling ----------------------------------------------------------


def _nearest_minority_neighbors(X_min: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest minority neighbors of each minority row."""
    d2 = np.sum((X_min[:, None, :] - X_min[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def _smote_synthesize(X_min: np.ndarray, n_new: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Interpolate ``n_new`` synthetic rows between minority samples and
    their nearest minority neighbors: ``x + g * (x_nn - x)`` with g in [0, 1).
    """
    if X_min.shape[0] < 2:
        raise InsufficientDataError("SMOTE needs at least 2 minority rows")
    k = min(int(k), X_min.shape[0] - 1)
    if k < 1:
        raise InsufficientDataError("SMOTE needs k_neighbors >= 1")
    neighbors = _nearest_minority_neighbors(X_min, k)
    base = rng.integers(0, X_min.shape[0], size=n_new)
    pick = rng.integers(0, k, size=n_new)
    g = rng.random(n_new)
    x = X_min[base]
    x_nn = X_min[neighbors[base, pick]]
    return x + g[:, None] * (x_nn - x)


def smote_balance(ds: FlowDataset, k_neighbors: int = 5, seed: int = 0) -> FlowDataset:
    """Raise the minority class to the majority count with SMOTE interpolation.

    Requires a fully numeric dataset (run after imputation and encoding).
    Already-balanced input is returned unchanged.
    """
    check_count("k_neighbors", k_neighbors)
    if not ds.is_fully_numeric():
        raise ParameterError("smote_balance requires a fully numeric dataset (no absent cells)")
    n_normal, n_attack = ds.class_counts()
    if n_normal == n_attack:
        return ds
    minority_label = 1 if n_attack < n_normal else 0
    n_new = abs(n_normal - n_attack)
    min_idx = np.flatnonzero(ds.labels == minority_label)
    if min_idx.size < 2:
        raise InsufficientDataError(
            f"minority class has {min_idx.size} rows, SMOTE needs at least 2"
        )
    rng = rng_stream(seed, 0x5A07E, minority_label)
    synthetic = _smote_synthesize(ds.values[min_idx], n_new, k_neighbors, rng)
    values = np.vstack([ds.values, synthetic])
    labels = np.concatenate([ds.labels, np.full(n_new, minority_label, dtype=np.int64)])
    meta = dict(ds.meta)
    meta["smote_synthetic_rows"] = int(n_new)
    return ds.replace(values=values, labels=labels, meta=meta)


def resample_to_attack_ratio(ds: FlowDataset, eta: float, seed: int = 0) -> FlowDataset:
    """Rebalance so that ``attack / total`` equals ``eta`` within one row.

    The over-represented class is randomly undersampled when that leaves at
    least one row; otherwise the under-represented class is raised with
    SMOTE. Surviving rows keep their original relative order.
    """
    eta = check_fraction("eta", eta)
    n_normal, n_attack = ds.class_counts()
    if n_normal == 0 or n_attack == 0:
        raise ResampleError("both classes must be present to resample")

    attack_idx = np.flatnonzero(ds.labels == 1)
    normal_idx = np.flatnonzero(ds.labels == 0)
    current = n_attack / ds.n_rows
    rng = rng_stream(seed, 0x3E7A, 1)

    if abs(current - eta) <= 1.0 / ds.n_rows:
        return ds

    if current < eta:
        # Normal traffic is over-represented.
        keep_normal = int(math.floor(n_attack * (1.0 - eta) / eta + 0.5))
        if keep_normal >= 1:
            chosen = np.sort(rng.choice(normal_idx, size=keep_normal, replace=False))
            idx = np.sort(np.concatenate([attack_idx, chosen]))
            return ds.take_rows(idx)
        target_attack = int(math.floor(n_normal * eta / (1.0 - eta) + 0.5))
        return _smote_to_count(ds, label=1, target=target_attack, rng=rng)

    # Attack traffic is over-represented.
    keep_attack = int(math.floor(n_normal * eta / (1.0 - eta) + 0.5))
    if keep_attack >= 1:
        chosen = np.sort(rng.choice(attack_idx, size=keep_attack, replace=False))
        idx = np.sort(np.concatenate([normal_idx, chosen]))
        return ds.take_rows(idx)
    target_normal = int(math.floor(n_attack * (1.0 - eta) / eta + 0.5))
    return _smote_to_count(ds, label=0, target=target_normal, rng=rng)


def _smote_to_count(ds: FlowDataset, label: int, target: int, rng: np.random.Generator) -> FlowDataset:
    if not ds.is_fully_numeric():
        raise ParameterError("SMOTE oversampling requires a fully numeric dataset")
    idx = np.flatnonzero(ds.labels == label)
    n_new = target - idx.size
    if n_new <= 0:
        return ds
    if idx.size < 2:
        raise ResampleError(f"class {label} has {idx.size} rows, cannot oversample")
    synthetic = _smote_synthesize(ds.values[idx], n_new, 5, rng)
    values = np.vstack([ds.values, synthetic])
    labels = np.concatenate([ds.labels, np.full(n_new, label, dtype=np.int64)])
    return ds.replace(values=values, labels=labels)
