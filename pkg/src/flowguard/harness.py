"""End-to-end experiment orchestration.

A run splits the raw dataset, fits the whole pipeline on the training side
(cleaning, encoding, optional rebalancing, feature selection, optional
tuning, ensemble training), prepares the test side with the training-side
encoder, and reports metrics under both voting modes. The same fitting core
backs single runs, the attack-ratio sweep, the voting comparison, and
cross-validation, so their results stay mutually consistent.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, fields as dataclass_fields

import numpy as np

from .ensemble import Hyperparameters, ModelArtifact, VotingEnsemble
from .errors import FlowGuardError, ParameterError
from .featstats import MadKsConfig, prefilter, score_features
from .flowdata import FlowDataset, SchemaMapping, load_csv, split_train_test, synth_generate
from .metrics import CvSummary, MetricsReport, evaluate_predictions, kfold_cv
from .preprocess import (
    EncoderState,
    PreprocessReport,
    drop_sparse_rows,
    encode_categorical,
    impute,
    resample_to_attack_ratio,
    smote_balance,
)
from .selector import EagleParams, GaParams, select_features
from .tuner import ParamSpace, SaParams, tune
from .validation import check_fraction, rng_stream

__all__ = [
    "PreprocessOptions",
    "PipelineConfig",
    "DatasetSource",
    "ExperimentConfig",
    "FittedPipeline",
    "RunReport",
    "preprocess_dataset",
    "fit_pipeline",
    "prepare_eval_dataset",
    "run_pipeline",
    "compare_voting",
    "sweep_detection_rate",
    "cross_validate",
    "synthetic_benchmark",
    "load_dataset",
]

CONFIG_VERSION = 1

RESAMPLE_THEN_SMOTE = "resample-then-smote"
SMOTE_THEN_RESAMPLE = "smote-then-resample"


def _from_dict(cls, doc: dict, context: str):
    """Build a dataclass from a JSON object, rejecting unknown keys."""
    known = {f.name for f in dataclass_fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ParameterError(f"unknown {context} keys: {sorted(unknown)}")
    return cls(**doc)


@dataclass(frozen=True)
class PreprocessOptions:
    max_missing_fraction: float = 0.30
    smote: bool = True
    smote_k: int = 5
    attack_ratio: float | None = None
    resample_order: str = RESAMPLE_THEN_SMOTE

    def __post_init__(self) -> None:
        if self.resample_order not in (RESAMPLE_THEN_SMOTE, SMOTE_THEN_RESAMPLE):
            raise ParameterError(f"unknown resample_order {self.resample_order!r}")
        if self.attack_ratio is not None:
            check_fraction("attack_ratio", self.attack_ratio)

    def to_dict(self) -> dict:
        return {
            "max_missing_fraction": self.max_missing_fraction,
            "smote": self.smote,
            "smote_k": self.smote_k,
            "attack_ratio": self.attack_ratio,
            "resample_order": self.resample_order,
        }


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob one pipeline run needs.

    The GA budget here is deliberately smaller than the :class:`GaParams`
    dataclass defaults so that desk-scale experiments finish in seconds;
    pass explicit params to search harder.
    """

    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    ga: GaParams = field(default_factory=lambda: GaParams(population_size=20, generations=12))
    eagle: EagleParams = field(default_factory=EagleParams)
    sa: SaParams = field(default_factory=SaParams)
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    train_fraction: float = 0.8
    voting: str = "soft"
    enable_prefilter: bool = False
    keep_top: int | None = None
    enable_tuner: bool = False
    lam: float = 1.0
    threads: int = 1

    def __post_init__(self) -> None:
        check_fraction("train_fraction", self.train_fraction)
        if self.voting not in ("hard", "soft"):
            raise ParameterError(f"voting must be 'hard' or 'soft', got {self.voting!r}")

    def to_dict(self) -> dict:
        return {
            "preprocess": self.preprocess.to_dict(),
            "ga": {f.name: getattr(self.ga, f.name) for f in dataclass_fields(self.ga)},
            "eagle": {f.name: getattr(self.eagle, f.name) for f in dataclass_fields(self.eagle)},
            "sa": {f.name: getattr(self.sa, f.name) for f in dataclass_fields(self.sa)},
            "hyperparameters": self.hyperparameters.to_dict(),
            "train_fraction": self.train_fraction,
            "voting": self.voting,
            "enable_prefilter": self.enable_prefilter,
            "keep_top": self.keep_top,
            "enable_tuner": self.enable_tuner,
            "lam": self.lam,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        kwargs = {}
        if "preprocess" in doc:
            kwargs["preprocess"] = _from_dict(PreprocessOptions, doc.pop("preprocess"), "preprocess")
        if "ga" in doc:
            kwargs["ga"] = _from_dict(GaParams, doc.pop("ga"), "ga")
        if "eagle" in doc:
            kwargs["eagle"] = _from_dict(EagleParams, doc.pop("eagle"), "eagle")
        if "sa" in doc:
            kwargs["sa"] = _from_dict(SaParams, doc.pop("sa"), "sa")
        if "hyperparameters" in doc:
            kwargs["hyperparameters"] = Hyperparameters.from_dict(doc.pop("hyperparameters"))
        known = {"train_fraction", "voting", "enable_prefilter", "keep_top", "enable_tuner", "lam", "threads"}
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown pipeline keys: {sorted(unknown)}")
        kwargs.update(doc)
        return cls(**kwargs)


@dataclass(frozen=True)
class DatasetSource:
    """Where experiment data comes from: a CSV on disk or the synthetic
    generator."""

    kind: str = "synthetic"
    path: str | None = None
    n_normal: int = 1600
    n_attack: int = 400
    d_informative: int = 5
    d_noise: int = 14

    def __post_init__(self) -> None:
        if self.kind not in ("csv", "synthetic"):
            raise ParameterError(f"dataset kind must be 'csv' or 'synthetic', got {self.kind!r}")
        if self.kind == "csv" and not self.path:
            raise ParameterError("csv dataset source needs a path")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "path": self.path,
            "n_normal": self.n_normal,
            "n_attack": self.n_attack,
            "d_informative": self.d_informative,
            "d_noise": self.d_noise,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    dataset: DatasetSource = field(default_factory=DatasetSource)
    schema: SchemaMapping | None = None
    eta_values: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5)
    at_risk_fractions: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    seeds: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ParameterError("seeds must not be empty")
        for v in list(self.eta_values) + list(self.at_risk_fractions):
            check_fraction("ratio", v)

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "pipeline": self.pipeline.to_dict(),
            "dataset": self.dataset.to_dict(),
            "schema": self.schema.to_dict() if self.schema else None,
            "eta_values": list(self.eta_values),
            "at_risk_fractions": list(self.at_risk_fractions),
            "seeds": list(self.seeds),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        version = doc.pop("version", None)
        if version != CONFIG_VERSION:
            raise ParameterError(f"config version must be {CONFIG_VERSION}, got {version}")
        kwargs = {}
        if "pipeline" in doc:
            kwargs["pipeline"] = PipelineConfig.from_dict(doc.pop("pipeline"))
        if "dataset" in doc:
            kwargs["dataset"] = _from_dict(DatasetSource, doc.pop("dataset"), "dataset")
        schema_doc = doc.pop("schema", None)
        if schema_doc:
            kwargs["schema"] = SchemaMapping.from_dict(schema_doc)
        known = {"eta_values", "at_risk_fractions", "seeds"}
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        for key in known & set(doc):
            kwargs[key] = tuple(doc[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def load_dataset(config: ExperimentConfig, seed: int) -> FlowDataset:
    src = config.dataset
    if src.kind == "csv":
        if config.schema is None:
            raise ParameterError("loading a CSV dataset requires a schema mapping in the config")
        return load_csv(src.path, config.schema)
    return synth_generate(src.n_normal, src.n_attack, src.d_informative, src.d_noise, seed)


def synthetic_benchmark(seed: int) -> FlowDataset:
    """The desk-scale analog dataset: 2,000 rows, 20 raw features of which
    5 are informative, imbalanced 4:1 toward normal traffic."""
    return synth_generate(1600, 400, 5, 14, seed)


# -- pipeline core ---------------------------------------------------------


@dataclass
class FittedPipeline:
    model: VotingEnsemble
    mask: np.ndarray
    feature_names: list[str]
    encoder: EncoderState
    preprocess_report: PreprocessReport
    fitness_history: list[dict]
    hyperparameters: Hyperparameters
    tuning_trace: list[dict] | None
    timings: dict[str, float]

    def artifact(self) -> ModelArtifact:
        return ModelArtifact(
            ensemble=self.model,
            feature_mask=self.mask,
            feature_names=self.feature_names,
            encoder=self.encoder,
        )

    def fingerprint(self) -> str:
        doc = json.dumps(self.artifact().to_dict(), sort_keys=True)
        return hashlib.sha256(doc.encode("utf-8")).hexdigest()


def _clean_encode(ds: FlowDataset, opts: PreprocessOptions,
                  enc: EncoderState | None) -> tuple[FlowDataset, EncoderState, PreprocessReport]:
    ds, rep_drop = drop_sparse_rows(ds, opts.max_missing_fraction)
    ds, rep_imp = impute(ds)
    n_before = ds.n_features
    ds, enc = encode_categorical(ds, enc)
    rep_enc = PreprocessReport(
        columns_added_by_encoding=ds.n_features - n_before,
        unseen_categories=int(ds.meta.get("unseen_categories", 0)),
    )
    return ds, enc, PreprocessReport.combine([rep_drop, rep_imp, rep_enc])


def preprocess_dataset(ds: FlowDataset, opts: PreprocessOptions,
                       seed: int) -> tuple[FlowDataset, EncoderState, PreprocessReport]:
    """Run the whole phase-1 chain: drop sparse rows, impute, one-hot
    encode, then the configured rebalancing stages in the configured
    order."""
    ds, enc, report = _clean_encode(ds, opts, None)
    report.class_counts_before = ds.class_counts()
    stages = [("resample", opts.attack_ratio is not None), ("smote", opts.smote)]
    if opts.resample_order == SMOTE_THEN_RESAMPLE:
        stages.reverse()
    for stage, enabled in stages:
        if not enabled:
            continue
        if stage == "resample":
            ds = resample_to_attack_ratio(ds, opts.attack_ratio, seed)
        else:
            ds = smote_balance(ds, opts.smote_k, seed)
    report.class_counts_after = ds.class_counts()
    return ds, enc, report


def fit_pipeline(train_raw: FlowDataset, config: PipelineConfig, seed: int) -> FittedPipeline:
    """Fit every pipeline stage on the training data only."""
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    ds, enc, report = preprocess_dataset(train_raw, config.preprocess, seed)
    timings["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    active = np.ones(ds.n_features, dtype=bool)
    if config.enable_prefilter and config.keep_top is not None:
        scores = score_features(ds, cfg=MadKsConfig(lam=config.lam))
        active = prefilter(scores, min(config.keep_top, ds.n_features))
    timings["prefilter"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    X_active = ds.values[:, active]
    local_mask, history = select_features(X_active, ds.labels, config.ga, config.eagle, seed)
    mask = np.zeros(ds.n_features, dtype=bool)
    mask[np.flatnonzero(active)[local_mask]] = True
    timings["select"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    trace = None
    hp = config.hyperparameters
    if config.enable_tuner:
        hp, trace = tune(ds.values, ds.labels, mask, ParamSpace.default(),
                         config.sa, seed, voting=config.voting)
    timings["tune"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = VotingEnsemble.from_hyperparameters(hp, random_state=seed, n_threads=config.threads)
    model.fit(ds.values[:, mask], ds.labels)
    timings["train"] = time.perf_counter() - t0

    return FittedPipeline(
        model=model,
        mask=mask,
        feature_names=ds.feature_names,
        encoder=enc,
        preprocess_report=report,
        fitness_history=history,
        hyperparameters=hp,
        tuning_trace=trace,
        timings=timings,
    )


def prepare_eval_dataset(test_raw: FlowDataset, fitted: FittedPipeline,
                         config: PipelineConfig) -> FlowDataset:
    """Clean a held-out dataset and encode it with the training-side
    encoder (unseen categories map to all-zero groups)."""
    ds, _ = drop_sparse_rows(test_raw, config.preprocess.max_missing_fraction)
    ds, _ = impute(ds)
    ds, _ = encode_categorical(ds, fitted.encoder)
    return ds


def _evaluate_both_votings(fitted: FittedPipeline, test_ds: FlowDataset) -> dict[str, MetricsReport]:
    X = test_ds.values[:, fitted.mask]
    reports = {}
    for mode in ("hard", "soft"):
        pred = fitted.model.predict(X, voting=mode)
        reports[mode] = evaluate_predictions(pred, test_ds.labels)
    return reports


# -- public operations -------------------------------------------------------


@dataclass
class RunReport:
    config: dict
    seed: int
    preprocess: dict
    selected_features: list[str]
    feature_mask: list[int]
    fitness_history: list[dict]
    hyperparameters: dict
    tuning_trace: list[dict] | None
    metrics: dict[str, dict]
    model_fingerprint: str
    timings: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "preprocess": self.preprocess,
            "selected_features": self.selected_features,
            "feature_mask": self.feature_mask,
            "fitness_history": self.fitness_history,
            "hyperparameters": self.hyperparameters,
            "tuning_trace": self.tuning_trace,
            "metrics": self.metrics,
            "model_fingerprint": self.model_fingerprint,
            "timings": self.timings,
        }


def run_pipeline(ds: FlowDataset, config: PipelineConfig, seed: int) -> tuple[RunReport, FittedPipeline]:
    """Full run: split, fit on train, evaluate both voting modes on test."""
    t0 = time.perf_counter()
    train_raw, test_raw = split_train_test(ds, config.train_fraction, seed)
    split_time = time.perf_counter() - t0

    fitted = fit_pipeline(train_raw, config, seed)

    t0 = time.perf_counter()
    test_ds = prepare_eval_dataset(test_raw, fitted, config)
    reports = _evaluate_both_votings(fitted, test_ds)
    eval_time = time.perf_counter() - t0

    timings = {"split": split_time, **fitted.timings, "evaluate": eval_time}
    report = RunReport(
        config=config.to_dict(),
        seed=int(seed),
        preprocess=fitted.preprocess_report.to_dict(),
        selected_features=[n for n, keep in zip(fitted.feature_names, fitted.mask) if keep],
        feature_mask=[int(b) for b in fitted.mask],
        fitness_history=fitted.fitness_history,
        hyperparameters=fitted.hyperparameters.to_dict(),
        tuning_trace=fitted.tuning_trace,
        metrics={mode: rep.to_dict() for mode, rep in reports.items()},
        model_fingerprint=fitted.fingerprint(),
        timings=timings,
    )
    return report, fitted


def compare_voting(ds: FlowDataset, config: PipelineConfig,
                   seed: int) -> tuple[MetricsReport, MetricsReport, str]:
    """Train once, evaluate the identical bases under both voting modes.

    Returns ``(hard_report, soft_report, model_fingerprint)``; the
    fingerprint is taken before and after evaluation to prove no retraining
    happened in between.
    """
    train_raw, test_raw = split_train_test(ds, config.train_fraction, seed)
    fitted = fit_pipeline(train_raw, config, seed)
    fp_before = fitted.fingerprint()
    test_ds = prepare_eval_dataset(test_raw, fitted, config)
    reports = _evaluate_both_votings(fitted, test_ds)
    fp_after = fitted.fingerprint()
    if fp_before != fp_after:
        raise FlowGuardError("model changed between voting evaluations")
    return reports["hard"], reports["soft"], fp_before


def sweep_detection_rate(config: ExperimentConfig) -> list[dict]:
    """Detection-rate grid over attack ratios and at-risk fractions.

    For every seed the training split is rebalanced to each attack ratio and
    the pipeline retrained; the test split is then perturbed so a growing
    fraction of its normal rows drift toward attack behavior (and are
    relabeled), which models devices becoming compromised. Failed cells are
    recorded with their error and the sweep continues.
    """
    cells: list[dict] = []
    pipeline = config.pipeline
    for seed in config.seeds:
        ds = load_dataset(config, seed)
        train_raw, test_raw = split_train_test(ds, pipeline.train_fraction, seed)
        for eta in config.eta_values:
            opts = PreprocessOptions(
                max_missing_fraction=pipeline.preprocess.max_missing_fraction,
                smote=pipeline.preprocess.smote,
                smote_k=pipeline.preprocess.smote_k,
                attack_ratio=eta,
                resample_order=RESAMPLE_THEN_SMOTE,
            )
            cell_cfg = PipelineConfig(
                preprocess=opts, ga=pipeline.ga, eagle=pipeline.eagle, sa=pipeline.sa,
                hyperparameters=pipeline.hyperparameters,
                train_fraction=pipeline.train_fraction, voting=pipeline.voting,
                enable_prefilter=pipeline.enable_prefilter, keep_top=pipeline.keep_top,
                enable_tuner=False, lam=pipeline.lam, threads=pipeline.threads,
            )
            try:
                fitted = fit_pipeline(train_raw, cell_cfg, seed)
                test_ds = prepare_eval_dataset(test_raw, fitted, cell_cfg)
            except FlowGuardError as exc:
                for frac in config.at_risk_fractions:
                    cells.append({
                        "eta": eta, "at_risk_fraction": frac, "seed": int(seed),
                        "cell_seed": None,
                        "detection_rate": None, "status": f"failed: {exc}",
                    })
                continue
            attack_pool = test_ds.values[test_ds.labels == 1]
            for frac in config.at_risk_fractions:
                # Keyed by the cell's values, not its grid position, so a
                # cell's result is independent of which other cells run.
                cell_key = (0x53EE9, int(round(eta * 10_000)), int(round(frac * 10_000)))
                rng = rng_stream(seed, *cell_key)
                perturbed = _inject_at_risk(test_ds, frac, attack_pool, rng)
                pred = fitted.model.predict(perturbed.values[:, fitted.mask],
                                            voting=pipeline.voting)
                report = evaluate_predictions(pred, perturbed.labels)
                cells.append({
                    "eta": eta, "at_risk_fraction": frac, "seed": int(seed),
                    "cell_seed": list(cell_key),
                    "detection_rate": report.detection_rate, "status": "ok",
                })
    return cells


def _inject_at_risk(test_ds: FlowDataset, fraction: float, attack_pool: np.ndarray,
                    rng: np.random.Generator) -> FlowDataset:
    """Relabel a fraction of the normal test rows as attacks after drifting
    their features toward a random attack row."""
    normal_idx = np.flatnonzero(test_ds.labels == 0)
    n_inject = int(np.floor(fraction * normal_idx.size))
    if n_inject == 0 or attack_pool.shape[0] == 0:
        return test_ds
    chosen = rng.choice(normal_idx, size=n_inject, replace=False)
    partners = attack_pool[rng.integers(0, attack_pool.shape[0], size=n_inject)]
    gamma = 0.6 + 0.35 * rng.random(n_inject)
    values = np.array(test_ds.values)
    values[chosen] = values[chosen] + gamma[:, None] * (partners - values[chosen])
    labels = np.array(test_ds.labels)
    labels[chosen] = 1
    return test_ds.replace(values=values, labels=labels)


def cross_validate(ds: FlowDataset, config: PipelineConfig, k: int, seed: int) -> CvSummary:
    """Run the configured pipeline under stratified k-fold CV.

    Each fold fits the full pipeline (cleaning, encoding, selection,
    optional tuning, training) on the other folds and evaluates under the
    configured voting mode on the held-out fold.
    """

    def fit_eval(train_raw: FlowDataset, test_raw: FlowDataset, fold_seed: int) -> MetricsReport:
        fitted = fit_pipeline(train_raw, config, fold_seed)
        test_ds = prepare_eval_dataset(test_raw, fitted, config)
        pred = fitted.model.predict(test_ds.values[:, fitted.mask], voting=config.voting)
        return evaluate_predictions(pred, test_ds.labels)

    return kfold_cv(ds, k, fit_eval, seed)
