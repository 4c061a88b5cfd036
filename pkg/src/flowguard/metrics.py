"""Confusion-matrix accounting, the nine derived metrics, and k-fold CV.

Attack traffic (label 1) is the positive class everywhere. Metrics with a
zero denominator are reported as an explicit undefined marker (NaN plus a
note) instead of a silent zero, so they cannot corrupt cross-validation
means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataError, ParameterError, StratificationError
from .flowdata import FlowDataset
from .validation import check_count, stratified_fold_indices

__all__ = [
    "METRIC_NAMES",
    "ConfusionMatrix",
    "MetricsReport",
    "CvSummary",
    "confusion",
    "compute_metrics",
    "evaluate_predictions",
    "summarize_folds",
    "kfold_cv",
]

METRIC_NAMES = (
    "accuracy",
    "specificity",
    "sensitivity",
    "precision",
    "f_measure",
    "fpr",
    "fnr",
    "mcc",
    "detection_rate",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    specificity: float
    sensitivity: float
    precision: float
    f_measure: float
    fpr: float
    fnr: float
    mcc: float
    detection_rate: float
    confusion: ConfusionMatrix
    undefined: tuple[str, ...] = field(default_factory=tuple)

    def value(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise ParameterError(f"unknown metric {name!r}")
        return getattr(self, name)

    def to_dict(self) -> dict:
        out = {}
        for name in METRIC_NAMES:
            v = getattr(self, name)
            out[name] = None if math.isnan(v) else v
        out["confusion"] = self.confusion.to_dict()
        out["undefined"] = list(self.undefined)
        return out


def confusion(predictions, truth) -> ConfusionMatrix:
    """Count agreement between predicted and true binary labels."""
    p = np.asarray(predictions, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise ParameterError(f"predictions {p.shape} and truth {t.shape} must be equal-length vectors")
    if p.size == 0:
        raise EmptyDataError("cannot build a confusion matrix from zero predictions")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def _ratio(num: float, den: float, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return math.nan
    return num / den


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Derive all nine evaluation metrics from a confusion matrix."""
    if cm.total == 0:
        raise EmptyDataError("confusion matrix is empty")
    tp, tn, fp, fn = float(cm.tp), float(cm.tn), float(cm.fp), float(cm.fn)
    undefined: list[str] = []

    accuracy = (tp + tn) / (tp + tn + fp + fn)
    specificity = _ratio(tn, tn + fp, "specificity", undefined)
    sensitivity = _ratio(tp, tp + fn, "sensitivity", undefined)
    precision = _ratio(tp, tp + fp, "precision", undefined)
    if math.isnan(precision) or math.isnan(sensitivity) or (precision + sensitivity) == 0:
        undefined.append("f_measure")
        f_measure = math.nan
    else:
        f_measure = 2.0 * precision * sensitivity / (precision + sensitivity)
    fpr = _ratio(fp, fp + tn, "fpr", undefined)
    fnr = _ratio(fn, fn + tp, "fnr", undefined)
    mcc_den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if mcc_den == 0:
        undefined.append("mcc")
        mcc = math.nan
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(mcc_den)
    detection_rate = _ratio(tp, tp + fn, "detection_rate", undefined)

    return MetricsReport(
        accuracy=accuracy,
        specificity=specificity,
        sensitivity=sensitivity,
        precision=precision,
        f_measure=f_measure,
        fpr=fpr,
        fnr=fnr,
        mcc=mcc,
        detection_rate=detection_rate,
        confusion=cm,
        undefined=tuple(undefined),
    )


def evaluate_predictions(predictions, truth) -> MetricsReport:
    return compute_metrics(confusion(predictions, truth))


@dataclass(frozen=True)
class CvSummary:
    """Per-fold reports plus mean and population standard deviation per
    metric (computed over folds where the metric is defined)."""

    per_fold: tuple[MetricsReport, ...]
    mean: dict[str, float]
    std: dict[str, float]

    @property
    def k(self) -> int:
        return len(self.per_fold)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "per_fold": [r.to_dict() for r in self.per_fold],
            "mean": {n: (None if math.isnan(v) else v) for n, v in self.mean.items()},
            "std": {n: (None if math.isnan(v) else v) for n, v in self.std.items()},
        }


def summarize_folds(per_fold: list[MetricsReport]) -> CvSummary:
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for name in METRIC_NAMES:
        vals = np.array([r.value(name) for r in per_fold], dtype=np.float64)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            mean[name] = math.nan
            std[name] = math.nan
        else:
            mean[name] = float(np.mean(vals))
            std[name] = float(np.std(vals))
    return CvSummary(per_fold=tuple(per_fold), mean=mean, std=std)


def kfold_cv(ds: FlowDataset, k: int, fit_eval, seed: int = 0) -> CvSummary:
    """Stratified k-fold cross-validation over a dataset.

    ``fit_eval(train_ds, test_ds, fold_seed)`` must run the configured
    pipeline on the training folds and return a :class:`MetricsReport` for
    the held-out fold; the harness supplies that closure.
    """
    check_count("k", k, minimum=2)
    for cls in np.unique(ds.labels):
        n_cls = int(np.sum(ds.labels == cls))
        if n_cls < k:
            raise StratificationError(f"class {cls} has {n_cls} rows, needs at least k={k}")
    folds = stratified_fold_indices(ds.labels, k, seed)
    reports: list[MetricsReport] = []
    for f, test_idx in enumerate(folds):
        train_idx = np.concatenate([folds[g] for g in range(k) if g != f])
        train_ds = ds.take_rows(np.sort(train_idx))
        test_ds = ds.take_rows(test_idx)
        reports.append(fit_eval(train_ds, test_ds, seed * 1000 + f))
    return summarize_folds(reports)
