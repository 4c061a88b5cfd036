"""Command-line front door.

Every subcommand writes its artifacts under ``--out`` and finishes with a
``manifest.json`` listing each emitted file with a sha256 content hash plus
the seed that was used (generated and recorded when ``--seed`` is omitted).

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import secrets
import sys
from pathlib import Path

from .ensemble import load_model, save_model
from .errors import FlowGuardError, SchemaError
from .flowdata import FlowDataset, SchemaMapping, load_csv, synth_generate, write_csv
from .harness import (
    ExperimentConfig,
    compare_voting,
    cross_validate,
    fit_pipeline,
    preprocess_dataset,
    run_pipeline,
    sweep_detection_rate,
)
from .featstats import MadKsConfig, score_features
from .metrics import CvSummary, evaluate_predictions
from .preprocess import drop_sparse_rows, encode_categorical, impute
from .tuner import ParamSpace, tune

__all__ = ["main", "console_main"]

# Matches the files the `synth` subcommand and the dataset writer produce.
DEFAULT_SCHEMA = SchemaMapping(
    label_column="label",
    positive_labels=frozenset({"attack"}),
    column_kinds={"proto": "categorical"},
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


class _Outputs:
    """Collects emitted files so the manifest can hash every one of them."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, name: str) -> None:
        digest = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
        self.files[name] = digest

    def write_json(self, name: str, doc) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
        self.record(name)

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text, encoding="utf-8")
        self.record(name)

    def finish(self, command: str, seed: int, seed_source: str) -> None:
        manifest = {
            "command": command,
            "seed": int(seed),
            "seed_source": seed_source,
            "files": dict(sorted(self.files.items())),
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=1)
            fh.write("\n")


def _resolve_seed(args) -> tuple[int, str]:
    if args.seed is not None:
        return int(args.seed), "flag"
    return secrets.randbits(31), "generated"


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()

    pipeline = config.pipeline
    if getattr(args, "eta", None) is not None:
        pipeline = dataclasses.replace(
            pipeline, preprocess=dataclasses.replace(pipeline.preprocess, attack_ratio=args.eta))
    if getattr(args, "train_fraction", None) is not None:
        pipeline = dataclasses.replace(pipeline, train_fraction=args.train_fraction)
    if getattr(args, "voting", None) is not None:
        pipeline = dataclasses.replace(pipeline, voting=args.voting)
    if getattr(args, "keep_top", None) is not None:
        pipeline = dataclasses.replace(pipeline, enable_prefilter=True, keep_top=args.keep_top)
    if getattr(args, "threads", None) is not None:
        pipeline = dataclasses.replace(pipeline, threads=args.threads)
    return dataclasses.replace(config, pipeline=pipeline)


def _load_input(args, config: ExperimentConfig) -> FlowDataset:
    schema = config.schema if config.schema is not None else DEFAULT_SCHEMA
    return load_csv(args.input, schema)


# -- subcommand implementations ----------------------------------------------


def _cmd_synth(args) -> int:
    seed, source = _resolve_seed(args)
    out = _Outputs(Path(args.out))
    ds = synth_generate(args.n_normal, args.n_attack, args.d_informative, args.d_noise, seed)
    write_csv(ds, out.path("dataset.csv"))
    out.record("dataset.csv")
    out.write_json("schema.json", DEFAULT_SCHEMA.to_dict())
    out.finish("synth", seed, source)
    return 0


def _cmd_preprocess(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    processed, _, report = preprocess_dataset(ds, config.pipeline.preprocess, seed)
    write_csv(processed, out.path("preprocessed.csv"))
    out.record("preprocessed.csv")
    schema = SchemaMapping(label_column="label", positive_labels=frozenset({"attack"}))
    out.write_json("preprocessed_schema.json", schema.to_dict())
    out.write_json("preprocess_report.json", report.to_dict())
    out.finish("preprocess", seed, source)
    return 0


def _cmd_score(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    ds, _ = drop_sparse_rows(ds, config.pipeline.preprocess.max_missing_fraction)
    ds, _ = impute(ds)
    ds, _ = encode_categorical(ds)
    scores = score_features(ds, cfg=MadKsConfig(lam=config.pipeline.lam))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["column_name", "score"])
    for s in scores:
        writer.writerow([s.column_name, repr(s.score)])
    out.write_text("feature_scores.csv", buf.getvalue())
    out.finish("score", seed, source)
    return 0


def _cmd_select(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    fitted = fit_pipeline(ds, config.pipeline, seed)
    out.write_json("selection.json", {
        "feature_mask": [int(b) for b in fitted.mask],
        "selected_features": [n for n, b in zip(fitted.feature_names, fitted.mask) if b],
    })
    out.write_text("fitness_history.csv", _history_csv(fitted.fitness_history))
    out.finish("select", seed, source)
    return 0


def _cmd_tune(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    processed, _, _ = preprocess_dataset(ds, config.pipeline.preprocess, seed)
    hp, trace = tune(processed, space=ParamSpace.default(), sa=config.pipeline.sa,
                     seed=seed, voting=config.pipeline.voting)
    out.write_json("tuned_hyperparameters.json", hp.to_dict())
    lines = ["iteration,best_fitness,temperature"]
    lines += [f"{t['iteration']},{t['best_fitness']!r},{t['temperature']!r}" for t in trace]
    out.write_text("tuning_trace.csv", "\n".join(lines) + "\n")
    out.finish("tune", seed, source)
    return 0


def _cmd_train(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    fitted = fit_pipeline(ds, config.pipeline, seed)
    save_model(fitted.artifact(), out.path("model.json"))
    out.record("model.json")
    out.write_json("train_summary.json", {
        "selected_features": [n for n, b in zip(fitted.feature_names, fitted.mask) if b],
        "hyperparameters": fitted.hyperparameters.to_dict(),
        "model_fingerprint": fitted.fingerprint(),
    })
    out.finish("train", seed, source)
    return 0


def _cmd_evaluate(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    artifact = load_model(args.model)
    ds = _load_input(args, config)
    ds, _ = drop_sparse_rows(ds, config.pipeline.preprocess.max_missing_fraction)
    ds, _ = impute(ds)
    ds, _ = encode_categorical(ds, artifact.encoder)
    if ds.feature_names != artifact.feature_names:
        raise SchemaError(
            "input columns do not match the model's training columns: "
            f"expected {artifact.feature_names}, got {ds.feature_names}"
        )
    X = ds.values[:, artifact.feature_mask]
    reports = {}
    for mode in ("hard", "soft"):
        pred = artifact.ensemble.predict(X, voting=mode)
        reports[mode] = evaluate_predictions(pred, ds.labels).to_dict()
    out.write_json("metrics.json", reports)
    out.finish("evaluate", seed, source)
    return 0


def _cmd_run(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    report, fitted = run_pipeline(ds, config.pipeline, seed)
    out.write_json("run_report.json", report.to_dict())
    save_model(fitted.artifact(), out.path("model.json"))
    out.record("model.json")
    out.finish("run", seed, source)
    return 0


def _cmd_sweep(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    if args.input:
        schema = config.schema if config.schema is not None else DEFAULT_SCHEMA
        config = dataclasses.replace(
            config,
            dataset=dataclasses.replace(config.dataset, kind="csv", path=args.input),
            schema=schema,
        )
    out = _Outputs(Path(args.out))
    cells = sweep_detection_rate(config)
    lines = ["eta,at_risk_fraction,seed,detection_rate,status"]
    for c in cells:
        dr = "" if c["detection_rate"] is None else repr(c["detection_rate"])
        lines.append(f"{c['eta']!r},{c['at_risk_fraction']!r},{c['seed']},{dr},{c['status']}")
    out.write_text("sweep.csv", "\n".join(lines) + "\n")
    out.finish("sweep", seed, source)
    return 0


def _cmd_compare_voting(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    hard, soft, fingerprint = compare_voting(ds, config.pipeline, seed)
    lines = ["method,accuracy,detection_rate,fpr"]
    for name, rep in (("hard", hard), ("soft", soft)):
        lines.append(f"{name},{rep.accuracy:.6f},{rep.detection_rate:.6f},{rep.fpr:.6f}")
    out.write_text("voting_comparison.csv", "\n".join(lines) + "\n")
    out.write_json("voting_comparison.json", {
        "hard": hard.to_dict(),
        "soft": soft.to_dict(),
        "model_fingerprint": fingerprint,
    })
    out.finish("compare-voting", seed, source)
    return 0


def _cmd_cv(args) -> int:
    seed, source = _resolve_seed(args)
    config = _load_config(args)
    out = _Outputs(Path(args.out))
    ds = _load_input(args, config)
    summary = cross_validate(ds, config.pipeline, args.folds, seed)
    out.write_text("cv_table.csv", _cv_table_csv(summary))
    out.write_json("cv_summary.json", summary.to_dict())
    out.finish("cv", seed, source)
    return 0


def _history_csv(history: list[dict]) -> str:
    lines = ["generation,best_fitness,mean_fitness,n_selected"]
    for h in history:
        lines.append(f"{h['generation']},{h['best_fitness']!r},{h['mean_fitness']!r},{h['n_selected']}")
    return "\n".join(lines) + "\n"


def _cv_table_csv(summary: CvSummary) -> str:
    lines = ["fold,accuracy,detection_rate,fpr"]
    for i, rep in enumerate(summary.per_fold, start=1):
        lines.append(f"{i},{rep.accuracy:.6f},{rep.detection_rate:.6f},{rep.fpr:.6f}")
    mean, std = summary.mean, summary.std
    cells = [f"{mean[n]:.6f}±{std[n]:.6f}" for n in ("accuracy", "detection_rate", "fpr")]
    lines.append("mean±std," + ",".join(cells))
    return "\n".join(lines) + "\n"


# -- parser wiring -----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, needs_input: bool) -> None:
    if needs_input:
        p.add_argument("--input", required=True, help="input CSV file")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="global seed (random and recorded if omitted)")
    p.add_argument("--out", default="flowguard-out", help="output directory")
    p.add_argument("--threads", type=int, help="worker-thread cap (results are thread-count-invariant)")


def build_parser() -> _Parser:
    parser = _Parser(prog="flowguard", description="IoT flow anomaly detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic flow dataset")
    p.add_argument("--n-normal", type=int, default=1600)
    p.add_argument("--n-attack", type=int, default=400)
    p.add_argument("--d-informative", type=int, default=5)
    p.add_argument("--d-noise", type=int, default=14)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="flowguard-out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="clean, encode, and rebalance a dataset")
    _add_common(p, needs_input=True)
    p.add_argument("--eta", type=float, help="target attack ratio for resampling")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("score", help="rank features by robust class separation")
    _add_common(p, needs_input=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("select", help="genetic feature selection")
    _add_common(p, needs_input=True)
    p.add_argument("--keep-top", type=int, help="prefilter to the top-scored columns first")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("tune", help="annealed swarm hyperparameter search")
    _add_common(p, needs_input=True)
    p.add_argument("--voting", choices=["hard", "soft"])
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("train", help="train the voting ensemble on a full dataset")
    _add_common(p, needs_input=True)
    p.add_argument("--keep-top", type=int)
    p.add_argument("--voting", choices=["hard", "soft"])
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on a dataset")
    _add_common(p, needs_input=True)
    p.add_argument("--model", required=True, help="model.json produced by train/run")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline: split, fit, evaluate")
    _add_common(p, needs_input=True)
    p.add_argument("--eta", type=float)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--keep-top", type=int)
    p.add_argument("--voting", choices=["hard", "soft"])
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="attack-ratio / at-risk detection-rate grid")
    p.add_argument("--input", help="optional CSV overriding the config dataset source")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="flowguard-out")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare-voting", help="hard vs soft voting on one trained model")
    _add_common(p, needs_input=True)
    p.add_argument("--train-fraction", type=float)
    p.set_defaults(func=_cmd_compare_voting)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    _add_common(p, needs_input=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--voting", choices=["hard", "soft"])
    p.set_defaults(func=_cmd_cv)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FlowGuardError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"flowguard: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"flowguard: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
