"""Flow-record datasets: loading, writing, synthesis, and splitting.

A :class:`FlowDataset` is the tabular unit passed between pipeline stages.
Feature cells live in a row-major float64 matrix where ``NaN`` marks an
absent (missing) value; categorical cells hold the index of their category
text. Labels are binary with 1 meaning attack/botnet traffic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataError, ParameterError, SchemaError, StratificationError
from .validation import check_fraction, rng_stream

__all__ = [
    "ColumnSpec",
    "SchemaMapping",
    "FlowDataset",
    "load_csv",
    "write_csv",
    "synth_generate",
    "split_train_test",
]

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
LABEL = "label"

_KINDS = (CONTINUOUS, CATEGORICAL, LABEL)


@dataclass(frozen=True)
class ColumnSpec:
    """Schema entry for one column.

    ``categories`` is meaningful only for categorical columns and lists the
    category texts in the order their indices were assigned.
    """

    name: str
    kind: str = CONTINUOUS
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise SchemaError(f"column {self.name!r} has unknown kind {self.kind!r}")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"column {self.name!r} has duplicate categories")
        object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class SchemaMapping:
    """How to interpret a raw CSV: which column is the label, which label
    texts count as attack, and the kind of each feature column.

    Columns absent from ``column_kinds`` default to continuous.
    """

    label_column: str
    positive_labels: frozenset[str]
    column_kinds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "positive_labels", frozenset(self.positive_labels))
        if not self.positive_labels:
            raise SchemaError("positive_labels must not be empty")
        for name, kind in self.column_kinds.items():
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise SchemaError(f"column_kinds[{name!r}] must be continuous or categorical, got {kind!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemaMapping":
        known = {"label_column", "positive_labels", "column_kinds"}
        unknown = set(doc) - known
        if unknown:
            raise SchemaError(f"unknown schema mapping keys: {sorted(unknown)}")
        if "label_column" not in doc or "positive_labels" not in doc:
            raise SchemaError("schema mapping needs label_column and positive_labels")
        return cls(
            label_column=str(doc["label_column"]),
            positive_labels=frozenset(str(v) for v in doc["positive_labels"]),
            column_kinds={str(k): str(v) for k, v in doc.get("column_kinds", {}).items()},
        )

    def to_dict(self) -> dict:
        return {
            "label_column": self.label_column,
            "positive_labels": sorted(self.positive_labels),
            "column_kinds": dict(sorted(self.column_kinds.items())),
        }

    @classmethod
    def from_json(cls, path) -> "SchemaMapping":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class FlowDataset:
    """Immutable feature matrix plus binary labels and column metadata.

    ``columns`` includes the label column spec, so the feature matrix always
    has ``len(columns) - 1`` columns. Arrays are made read-only at
    construction time and are safe to share between threads.
    """

    columns: tuple[ColumnSpec, ...]
    values: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        columns = tuple(self.columns)
        if sum(1 for c in columns if c.kind == LABEL) != 1:
            raise SchemaError("schema must contain exactly one label column")
        values = np.array(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if values.ndim != 2:
            raise SchemaError(f"values must be 2-dimensional, got shape {values.shape}")
        if values.shape[1] != len(columns) - 1:
            raise SchemaError(
                f"values have {values.shape[1]} columns but schema declares {len(columns) - 1} features"
            )
        if labels.shape != (values.shape[0],):
            raise SchemaError("labels length must equal row count")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise SchemaError("labels must be binary (0 = normal, 1 = attack)")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    # -- basic accessors -------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def feature_columns(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.kind != LABEL)

    @property
    def label_column(self) -> ColumnSpec:
        return next(c for c in self.columns if c.kind == LABEL)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.feature_columns]

    def class_counts(self) -> tuple[int, int]:
        """Return ``(n_normal, n_attack)``."""
        n_attack = int(np.sum(self.labels == 1))
        return self.n_rows - n_attack, n_attack

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def is_fully_numeric(self) -> bool:
        return not np.any(np.isnan(self.values))

    def replace(self, *, columns=None, values=None, labels=None, meta=None) -> "FlowDataset":
        """Return a new dataset with the given fields substituted."""
        return FlowDataset(
            columns=self.columns if columns is None else tuple(columns),
            values=self.values if values is None else values,
            labels=self.labels if labels is None else labels,
            meta=dict(self.meta) if meta is None else dict(meta),
        )

    def take_rows(self, indices) -> "FlowDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return self.replace(values=self.values[idx], labels=self.labels[idx])


# -- CSV I/O -------------------------------------------------------------


def load_csv(path, mapping: SchemaMapping) -> FlowDataset:
    """Load a header-first CSV into a :class:`FlowDataset`.

    Labels come from membership of the raw label text in
    ``mapping.positive_labels``. Feature cells that are empty or fail to
    parse for their declared kind are stored as absent (NaN); category texts
    are assigned indices in first-appearance order. Row and class counts are
    recorded in ``meta`` for provenance.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: file is empty") from None
        if mapping.label_column not in header:
            raise SchemaError(f"{path}: header lacks label column {mapping.label_column!r}")
        label_idx = header.index(mapping.label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        kinds = [mapping.column_kinds.get(name, CONTINUOUS) for name in feature_names]
        categories: list[list[str]] = [[] for _ in feature_names]

        rows: list[list[float]] = []
        labels: list[int] = []
        n_unparseable = 0
        for raw in reader:
            if not raw:
                continue
            if len(raw) != len(header):
                raise SchemaError(
                    f"{path}: row {len(rows) + 2} has {len(raw)} cells, expected {len(header)}"
                )
            labels.append(1 if raw[label_idx] in mapping.positive_labels else 0)
            cells: list[float] = []
            j = 0
            for i, text in enumerate(raw):
                if i == label_idx:
                    continue
                text = text.strip()
                if text == "":
                    cells.append(math.nan)
                elif kinds[j] == CONTINUOUS:
                    try:
                        cells.append(float(text))
                    except ValueError:
                        cells.append(math.nan)
                        n_unparseable += 1
                else:
                    cats = categories[j]
                    if text not in cats:
                        cats.append(text)
                    cells.append(float(cats.index(text)))
                j += 1
            rows.append(cells)

    if not rows:
        raise EmptyDataError(f"{path}: no data rows")

    columns = [
        ColumnSpec(name, kind, tuple(cats) if kind == CATEGORICAL else ())
        for name, kind, cats in zip(feature_names, kinds, categories)
    ]
    columns.append(ColumnSpec(mapping.label_column, LABEL))
    values = np.array(rows, dtype=np.float64)
    n_attack = sum(labels)
    meta = {
        "source": str(path),
        "n_rows": len(rows),
        "class_counts": {"normal": len(rows) - n_attack, "attack": n_attack},
        "unparseable_cells": n_unparseable,
        "missing_cells": int(np.isnan(values).sum()),
    }
    return FlowDataset(columns=tuple(columns), values=values, labels=np.array(labels), meta=meta)


def write_csv(ds: FlowDataset, path) -> None:
    """Write a dataset in the same dialect :func:`load_csv` reads.

    Absent cells become empty fields, categorical indices are written as
    their category text, and labels are written as ``attack`` / ``normal``
    (readable back with ``positive_labels={"attack"}``).
    """
    feature_cols = ds.feature_columns
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in feature_cols] + [ds.label_column.name])
        for r in range(ds.n_rows):
            row: list[str] = []
            for j, col in enumerate(feature_cols):
                v = ds.values[r, j]
                if math.isnan(v):
                    row.append("")
                elif col.kind == CATEGORICAL:
                    row.append(col.categories[int(v)])
                else:
                    row.append(repr(float(v)))
            row.append("attack" if ds.labels[r] == 1 else "normal")
            writer.writerow(row)


# -- synthesis -----------------------------------------------------------


def synth_generate(n_normal: int, n_attack: int, d_informative: int, d_noise: int,
                   seed: int) -> FlowDataset:
    """Generate a desk-scale flow dataset with known structure.

    Informative columns are Gaussian with class-conditional medians separated
    by at least one unit; noise columns are identically distributed across
    classes. One categorical ``proto`` column with three uninformative
    categories is appended. The output is a pure function of the arguments.
    """
    n_normal, n_attack = int(n_normal), int(n_attack)
    d_informative, d_noise = int(d_informative), int(d_noise)
    if n_normal < 0 or n_attack < 0 or d_informative < 0 or d_noise < 0:
        raise ParameterError("counts must be non-negative")
    n_rows = n_normal + n_attack
    if n_rows == 0:
        raise EmptyDataError("cannot generate a dataset with zero rows")
    if n_normal > 0 and n_attack > 0 and d_informative < 1:
        raise ParameterError("need at least one informative column when both classes are present")

    rng = rng_stream(seed, 0xF10, 1)
    labels = np.concatenate([np.zeros(n_normal, dtype=np.int64), np.ones(n_attack, dtype=np.int64)])

    # Median gaps cycle through [1.5, 2.5] so every informative column is
    # individually useful but not equally strong.
    gaps = 1.5 + (np.arange(d_informative) % 5) * 0.25
    informative = rng.normal(size=(n_rows, d_informative))
    informative[labels == 1] += gaps
    noise = rng.normal(size=(n_rows, d_noise))
    proto = rng.integers(0, 3, size=(n_rows, 1)).astype(np.float64)

    values = np.hstack([informative, noise, proto])
    order = rng.permutation(n_rows)
    values = values[order]
    labels = labels[order]

    columns = (
        [ColumnSpec(f"inf_{j:02d}") for j in range(d_informative)]
        + [ColumnSpec(f"noise_{j:02d}") for j in range(d_noise)]
        + [ColumnSpec("proto", CATEGORICAL, ("tcp", "udp", "icmp"))]
        + [ColumnSpec("label", LABEL)]
    )
    meta = {
        "source": "synthetic",
        "seed": int(seed),
        "n_rows": n_rows,
        "class_counts": {"normal": n_normal, "attack": n_attack},
        "informative_columns": d_informative,
        "noise_columns": d_noise,
    }
    return FlowDataset(columns=tuple(columns), values=values, labels=labels, meta=meta)


# -- splitting -----------------------------------------------------------


def split_train_test(ds: FlowDataset, train_fraction: float, seed: int) -> tuple[FlowDataset, FlowDataset]:
    """Stratified exact partition into train and test datasets.

    Each class contributes ``round(train_fraction * n_class)`` rows to the
    train side; every row lands on exactly one side and relative row order
    is preserved within each side.
    """
    train_fraction = check_fraction("train_fraction", train_fraction)
    if ds.n_rows < 2:
        raise StratificationError("need at least 2 rows to split")
    rng = rng_stream(seed, 0x59, 1)

    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for cls in (0, 1):
        cls_idx = np.flatnonzero(ds.labels == cls)
        if cls_idx.size == 0:
            continue
        if cls_idx.size < 2:
            raise StratificationError(f"class {cls} has fewer than 2 rows")
        n_train = int(math.floor(train_fraction * cls_idx.size + 0.5))
        n_train = min(max(n_train, 0), cls_idx.size)
        shuffled = rng.permutation(cls_idx)
        train_idx.append(shuffled[:n_train])
        test_idx.append(shuffled[n_train:])

    train = np.sort(np.concatenate(train_idx)) if train_idx else np.empty(0, dtype=np.int64)
    test = np.sort(np.concatenate(test_idx)) if test_idx else np.empty(0, dtype=np.int64)
    if train.size == 0 or test.size == 0:
        raise StratificationError(
            f"train_fraction {train_fraction} leaves one side empty for {ds.n_rows} rows"
        )
    return ds.take_rows(train), ds.take_rows(test)
