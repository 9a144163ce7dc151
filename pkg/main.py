import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Any, Optional, Sequence

import numpy as np  # type: ignore

from autoencoder import build_sae, load_sae, train_greedy, write_histories
from config import Config, PipelineConfig
from data_model import ConsumptionMatrix, MinMaxScaling, load_csv, save_csv, season_profile
from exceptions import InvalidInputError, NtlError
from ntl_types import Stage
import pipeline
from preprocess import near_miss_indices, zscore_filter
from synthetic import dataset_from_config

logger = logging.getLogger(__name__)

# command -> {argument: (config group, field)}
OVERRIDES: dict[str, dict[str, tuple[str, str]]] = {
    "synth-data": {
        "n_consumers": ("generator", "n_consumers"),
        "n_days": ("generator", "n_days"),
        "theft_fraction": ("generator", "theft_fraction"),
        "missing_fraction": ("generator", "missing_fraction"),
    },
    "impute": {
        "search_size": ("imputation", "search_size"),
        "min_gap": ("imputation", "min_gap"),
    },
    "preprocess": {
        "zscore_threshold": ("preprocess", "zscore_threshold"),
        "nearmiss_k": ("preprocess", "nearmiss_k"),
        "target_per_class": ("preprocess", "target_per_class"),
    },
    "train-sae": {
        "epochs": ("autoencoder", "epochs"),
        "batch_size": ("autoencoder", "batch_size"),
        "dims": ("autoencoder", "dims"),
    },
    "augment": {
        "n_samples": ("augmentation", "n_samples"),
        "ratio": ("augmentation", "ratio"),
        "pac": ("augmentation", "pac"),
        "epochs": ("augmentation", "epochs"),
    },
    "train": {
        "mode": ("ensemble", "mode"),
        "grid": ("ensemble", "grid"),
        "folds": ("ensemble", "folds"),
    },
}


def apply_overrides(args: argparse.Namespace, config: PipelineConfig) -> PipelineConfig:
    """A copy of `config` with every command-line value given for `args.command` set."""
    for argument, (group, name) in OVERRIDES.get(args.command, {}).items():
        value: Any = getattr(args, argument, None)
        if value is None:
            continue
        if isinstance(value, list):
            value = tuple(value)
        settings = dataclasses.replace(getattr(config, group), **{name: value})
        config = dataclasses.replace(config, **{group: settings})
    return config


def load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config.seed = args.seed
    config = apply_overrides(args, config)
    config.validate()
    return config


def load_data(args: argparse.Namespace, config: PipelineConfig) -> ConsumptionMatrix:
    if getattr(args, "data", None):
        return load_csv(args.data)
    logger.info("no --data given, generating a synthetic dataset")
    return dataset_from_config(config.generator, config.seed)[0]


def out_path(args: argparse.Namespace, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def write_json(path: str, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, default=pipeline.json_default)
    print(path)


def complete(matrix: ConsumptionMatrix, config: PipelineConfig) -> ConsumptionMatrix:
    if matrix.is_complete:
        return matrix
    return pipeline.Pipeline(config, matrix).impute(matrix)


def scaled_features(matrix: ConsumptionMatrix,
                    config: PipelineConfig) -> tuple[ConsumptionMatrix, np.ndarray, MinMaxScaling]:
    matrix = complete(matrix, config)
    scaling = MinMaxScaling.fit(matrix.dense())
    return matrix, scaling.transform(matrix.dense()), scaling


def encoded_features(args: argparse.Namespace, config: PipelineConfig):
    """The completed matrix, the autoencoder in `--models-dir` and the matrix's latent rows."""
    matrix = complete(load_data(args, config), config)
    sae = load_sae(os.path.join(args.models_dir, Config.model_file))
    if sae.scaling is None:
        raise InvalidInputError("the persisted autoencoder has no input scaling")
    return matrix, sae, sae.encode(sae.scaling.transform(matrix.dense(), clip=True))


def grid_argument(text: str) -> dict:
    """A parameter grid given inline as JSON or as the path of a JSON file."""
    try:
        if os.path.exists(text):
            with open(text, encoding="utf-8") as f:
                grid = json.load(f)
        else:
            grid = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise argparse.ArgumentTypeError(f"cannot read the grid: {exc}")
    if not isinstance(grid, dict):
        raise argparse.ArgumentTypeError("the grid must be a JSON object of parameter lists")
    return grid


def synth_data(args: argparse.Namespace, config: PipelineConfig) -> None:
    matrix, truth = dataset_from_config(config.generator, config.seed)
    save_csv(matrix, out_path(args, "data.csv"))
    save_csv(matrix.with_values(truth.clean), out_path(args, "clean.csv"))
    profile = season_profile(matrix)
    profile.to_csv(out_path(args, "season_profile.csv"), index=False, lineterminator="\n")
    print(profile.to_string(index=False))
    write_json(out_path(args, "truth.json"), truth.to_dict())


def impute(args: argparse.Namespace, config: PipelineConfig) -> None:
    runner = pipeline.Pipeline(config, load_data(args, config))
    matrix = runner.impute(runner.data)
    output = args.output or out_path(args, "imputed.csv")
    save_csv(matrix, output)
    print(output)
    write_json(out_path(args, "impute_summary.json"), runner.report.summaries[Stage.IMPUTE.value])


def preprocess(args: argparse.Namespace, config: PipelineConfig) -> None:
    settings = config.preprocess
    matrix = complete(load_data(args, config), config)
    if settings.zscore_enabled:
        matrix, report = zscore_filter(matrix, settings.zscore_threshold, settings.zscore_axis)
        write_json(out_path(args, "zscore_report.json"), report.to_dict())
    if settings.nearmiss_enabled:
        features = MinMaxScaling.fit(matrix.dense()).transform(matrix.dense())
        rows = near_miss_indices(features, matrix.labels.astype(np.int64), settings.nearmiss_k,
                                 settings.target_per_class, pipeline.stage_seed(config.seed, Stage.NEARMISS))
        matrix = matrix.select_rows(rows)
    save_csv(matrix, out_path(args, "preprocessed.csv"))
    print(f"{matrix.n_consumers} consumers kept")


def train_sae(args: argparse.Namespace, config: PipelineConfig) -> None:
    settings = config.autoencoder
    _, features, scaling = scaled_features(load_data(args, config), config)
    seed = pipeline.stage_seed(config.seed, Stage.SAE)
    model, histories = train_greedy(
        build_sae(features.shape[1], settings.dims, seed), features, settings.epochs, settings.batch_size, seed,
        learning_rate=settings.learning_rate, patience=settings.early_stop_patience, delta=settings.early_stop_delta,
        fine_tune_epochs=settings.fine_tune_epochs,
    )
    model.scaling = scaling
    model.save_as(out_path(args, Config.model_file))
    write_histories(histories, args.out_dir)
    print("\n".join(model.describe()))


def augment_data(args: argparse.Namespace, config: PipelineConfig) -> None:
    os.makedirs(args.out_dir, exist_ok=True)
    if config.augmentation.space == "raw":
        matrix, features, scaling = scaled_features(load_data(args, config), config)
        runner = pipeline.Pipeline(config, matrix, args.out_dir)
        synthetic, labels = runner.augment(features, matrix.labels.astype(np.int64))
        values = scaling.inverse(synthetic)
    else:
        matrix, sae, latent = encoded_features(args, config)
        runner = pipeline.Pipeline(config, matrix, args.out_dir)
        synthetic, labels = runner.augment(latent, matrix.labels.astype(np.int64))
        decoded = sae.decode(synthetic) if len(synthetic) else np.empty((0, matrix.n_days))
        values = sae.scaling.inverse(decoded)
    ids = [f"{pipeline.SYNTHETIC_PREFIX}{i:05d}" for i in range(len(values))]
    rows = ConsumptionMatrix.from_dense(ids, labels, matrix.dates, values)
    save_csv(rows, out_path(args, "synthetic.csv"), {"synthetic": np.ones(len(values), dtype=np.int64)})
    print(f"{rows.n_consumers} synthetic rows, {int(labels.sum())} theft")


def train(args: argparse.Namespace, config: PipelineConfig) -> None:
    matrix, _, latent = encoded_features(args, config)
    runner = pipeline.Pipeline(config, matrix)
    model = runner.fit_ensemble(latent, matrix.labels.astype(np.int64))
    model.save_as(out_path(args, Config.ensemble_file))
    if "grid" in runner.report.summaries:
        write_json(out_path(args, "grid_search.json"), runner.report.summaries["grid"])
    print(f"ensemble ({model.mode.value}) trained on {matrix.n_consumers} rows")


def score_persisted(args: argparse.Namespace, config: PipelineConfig, data: ConsumptionMatrix) -> None:
    metrics = pipeline.evaluate_report(args.models_dir, data, config)
    write_json(out_path(args, "metrics.json"), metrics.to_dict())
    pipeline.emit_curves(metrics, args.out_dir)


def evaluate(args: argparse.Namespace, config: PipelineConfig) -> None:
    score_persisted(args, config, load_data(args, config))


def run(args: argparse.Namespace, config: PipelineConfig) -> None:
    report = pipeline.run_pipeline(config, load_data(args, config), args.out_dir)
    pipeline.emit_curves(report.metrics, args.out_dir)
    print("\n".join(report.log))
    print(json.dumps(report.metrics.to_dict(), indent=2))


def report(args: argparse.Namespace, config: PipelineConfig) -> None:
    data = load_data(args, config)
    score_persisted(args, config, data)
    if args.repeats > 1:
        persisted = os.path.join(args.models_dir, Config.config_file)
        if os.path.exists(persisted):
            config = PipelineConfig.load(persisted)
        repeated = pipeline.repeat_runs(config, data, args.repeats, args.resplit)
        repeated.save_as(out_path(args, "repeated_report.json"))
        for name, mean in repeated.mean.items():
            print(f"{name:>16} {mean:.4f} +- {repeated.std[name]:.4f}")


def sweep(args: argparse.Namespace, config: PipelineConfig) -> None:
    table = pipeline.split_sweep(config, load_data(args, config), args.fractions)
    table.to_csv(out_path(args, "sweep.csv"), index=False, float_format="%.17g", lineterminator="\n")
    print(table.to_string(index=False))


COMMANDS = {
    "synth-data": synth_data,
    "impute": impute,
    "preprocess": preprocess,
    "train-sae": train_sae,
    "augment": augment_data,
    "train": train,
    "evaluate": evaluate,
    "run": run,
    "report": report,
    "sweep": sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration as JSON")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--out-dir", default="out", help="directory for every output")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(description="Electricity theft detection pipeline")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth-data", parents=[common], help="generate a synthetic consumption dataset")
    synth.add_argument("--n-consumers", type=int)
    synth.add_argument("--n-days", type=int)
    synth.add_argument("--theft-fraction", type=float)
    synth.add_argument("--missing-fraction", type=float)

    fill = commands.add_parser("impute", parents=[common], help="fill missing readings")
    fill.add_argument("--input", "--data", dest="data", help="consumption CSV with missing cells")
    fill.add_argument("--output", help="imputed CSV, by default imputed.csv in the output directory")
    fill.add_argument("--search-size", type=int)
    fill.add_argument("--min-gap", type=int)

    filters = commands.add_parser("preprocess", parents=[common], help="filter outliers, undersample")
    filters.add_argument("--data")
    filters.add_argument("--zscore-threshold", type=float)
    filters.add_argument("--nearmiss-k", type=int)
    filters.add_argument("--target-per-class", type=int)

    sae = commands.add_parser("train-sae", parents=[common], help="train the stacked autoencoder")
    sae.add_argument("--data")
    sae.add_argument("--epochs", type=int)
    sae.add_argument("--batch-size", type=int)
    sae.add_argument("--dims", type=int, nargs="+", help="code widths, outermost first")

    gan = commands.add_parser("augment", parents=[common], help="train the GAN and sample rows")
    gan.add_argument("--data")
    gan.add_argument("--models-dir", default="out")
    gan.add_argument("--n-samples", type=int)
    gan.add_argument("--ratio", type=int, nargs=2, metavar=("GENUINE", "THEFT"))
    gan.add_argument("--pac", type=int)
    gan.add_argument("--epochs", type=int)

    ensemble = commands.add_parser("train", parents=[common], help="train the ensemble")
    ensemble.add_argument("--data")
    ensemble.add_argument("--models-dir", default="out")
    ensemble.add_argument("--mode", choices=["soft-vote", "stacked"])
    ensemble.add_argument("--grid", type=grid_argument, help="parameter grid as JSON text or a JSON file")
    ensemble.add_argument("--folds", type=int)

    scoring = commands.add_parser("evaluate", parents=[common], help="score persisted models")
    scoring.add_argument("--data")
    scoring.add_argument("--models-dir", default="out")

    full = commands.add_parser("run", parents=[common], help="run the whole pipeline")
    full.add_argument("--data")

    repeated = commands.add_parser("report", parents=[common],
                                   help="score persisted models, optionally averaged over rerun pipelines")
    repeated.add_argument("--data")
    repeated.add_argument("--models-dir", default="out")
    repeated.add_argument("--repeats", type=int, default=1)
    repeated.add_argument("--resplit", action="store_true", help="draw a new test split on every run")

    split = commands.add_parser("sweep", parents=[common], help="rerun at several test fractions")
    split.add_argument("--data")
    split.add_argument("--fractions", type=float, nargs="+", default=list(pipeline.SWEEP_FRACTIONS))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format=Config.log_format, level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        COMMANDS[args.command](args, load_config(args))
    except NtlError as exc:
        message = str(exc)
        if not message.startswith("["):
            message = f"[{args.command}] {message}"
        print(f"error: {message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
