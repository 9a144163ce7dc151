"""Stage chaining: impute, filter, split, scale, undersample, encode, augment, classify, evaluate."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np  # type: ignore
import pandas as pd  # type: ignore

from augmentation.gan import augment, load_gan
from autoencoder import StackedAutoencoder, build_sae, load_sae, reconstruction_error, train_greedy, write_histories
from config import Config, PipelineConfig
from data_model import ConsumptionMatrix, MinMaxScaling, SeasonCalendar
from ensemble import EnsembleModel, apply_cell, ensemble_fit, grid_search_cv, load_ensemble
from exceptions import InvalidInputError, NtlError, StageError
from imputation import impute_matrix_report
from message_log import RunLog
from metrics import MetricsReport, evaluate_scores
from neural.serialization import save_json
from ntl_types import Stage
from preprocess import near_miss_indices, zscore_filter
import render_utils

logger = logging.getLogger(__name__)

SYNTHETIC_PREFIX = "synthetic-"
SWEEP_FRACTIONS = (0.2, 0.3, 0.4, 0.5)


def stage_seed(seed: int, stage: Stage) -> int:
    """Seed of one stage, derived from the global seed and the stage's position."""
    position = list(Stage).index(stage)
    return int(np.random.SeedSequence([seed, position]).generate_state(1)[0])


def repeat_seed(seed: int, repeat: int) -> int:
    if repeat == 0:
        return seed
    return int(np.random.SeedSequence([seed, 1000 + repeat]).generate_state(1)[0])


def stratified_split(labels: np.ndarray, test_fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) row indices; each class contributes round(test_fraction * count) test rows."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    test = []
    for label in (0, 1):
        members = np.flatnonzero(labels == label)
        n_test = int(round(test_fraction * len(members)))
        if n_test < 1 or n_test >= len(members):
            raise InvalidInputError(f"class {label} has {len(members)} rows, too few for a "
                                    f"{test_fraction:.0%} test split")
        test.append(rng.choice(members, n_test, replace=False))
    test_rows = np.sort(np.concatenate(test))
    return np.setdiff1d(np.arange(len(labels)), test_rows), test_rows


@dataclass
class TrainedModels:
    sae: StackedAutoencoder
    ensemble: EnsembleModel


@dataclass
class RunReport:
    durations: dict[str, float] = field(default_factory=dict)
    summaries: dict[str, dict] = field(default_factory=dict)
    metrics: Optional[MetricsReport] = None
    config: dict = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    log: list[str] = field(default_factory=list)

    @property
    def total_seconds(self) -> float:
        return float(sum(self.durations.values()))

    def to_dict(self) -> dict:
        return {
            "durations": dict(self.durations),
            "total_seconds": self.total_seconds,
            "summaries": self.summaries,
            "metrics": self.metrics.to_dict() if self.metrics is not None else None,
            "config": self.config,
            "artifacts": dict(self.artifacts),
            "log": list(self.log),
        }

    def save_as(self, filename: str) -> None:
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, default=json_default)


def json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not serializable")


class Pipeline:
    """One run over one dataset; owns every intermediate result."""

    def __init__(self, config: PipelineConfig, data: ConsumptionMatrix, out_dir: Optional[str] = None,
                 split_seed: Optional[int] = None):
        config.validate()
        self.config = config
        self.data = data
        self.out_dir = out_dir
        self.split_seed = config.seed if split_seed is None else split_seed
        self.run_log = RunLog()
        self.report = RunReport(config=config.to_dict())
        self.models: Optional[TrainedModels] = None

    def seed(self, stage: Stage) -> int:
        if stage is Stage.SPLIT:
            return stage_seed(self.split_seed, stage)
        return stage_seed(self.config.seed, stage)

    @contextmanager
    def stage(self, name: Stage) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except NtlError as exc:
            self.run_log.add_message(f"failed: {exc}", name.value)
            raise StageError(name.value, str(exc)) from exc
        finally:
            self.report.durations[name.value] = time.perf_counter() - started

    def log(self, stage: Stage, text: str) -> None:
        self.run_log.add_message(text, stage.value)

    def impute(self, matrix: ConsumptionMatrix) -> ConsumptionMatrix:
        settings = self.config.imputation
        with self.stage(Stage.IMPUTE):
            calendar = SeasonCalendar.for_matrix(matrix, settings.season_start_month)
            matrix, summary = impute_matrix_report(matrix, calendar, settings.search_size, min_gap=settings.min_gap,
                                                   two_sided=settings.two_sided, workers=settings.workers)
            self.report.summaries[Stage.IMPUTE.value] = summary.to_dict()
            self.log(Stage.IMPUTE, f"filled {summary.gaps_filled} gaps")
        return matrix

    def zscore(self, matrix: ConsumptionMatrix) -> ConsumptionMatrix:
        settings = self.config.preprocess
        with self.stage(Stage.ZSCORE):
            if settings.zscore_enabled:
                matrix, report = zscore_filter(matrix, settings.zscore_threshold, settings.zscore_axis)
                dropped = len(report.dropped)
            else:
                dropped = 0
            self.report.summaries[Stage.ZSCORE.value] = {"dropped": dropped, "kept": matrix.n_consumers}
            self.log(Stage.ZSCORE, f"dropped {dropped} outlier consumers")
        return matrix

    def split(self, matrix: ConsumptionMatrix) -> tuple[ConsumptionMatrix, ConsumptionMatrix]:
        with self.stage(Stage.SPLIT):
            train_rows, test_rows = stratified_split(matrix.labels, self.config.test_fraction, self.seed(Stage.SPLIT))
            train, test = matrix.select_rows(train_rows), matrix.select_rows(test_rows)
            self.report.summaries[Stage.SPLIT.value] = {
                "train": train.n_consumers, "test": test.n_consumers,
                "train_theft": int(train.labels.sum()), "test_theft": int(test.labels.sum()),
            }
            self.log(Stage.SPLIT, f"{train.n_consumers} training and {test.n_consumers} test consumers")
        return train, test

    def normalize(self, train: ConsumptionMatrix, test: ConsumptionMatrix
                  ) -> tuple[np.ndarray, np.ndarray, MinMaxScaling]:
        with self.stage(Stage.NORMALIZE):
            scaling = MinMaxScaling.fit(train.dense())
            train_values = scaling.transform(train.dense())
            test_values = scaling.transform(test.dense(), clip=True)
        return train_values, test_values, scaling

    def nearmiss(self, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        settings = self.config.preprocess
        with self.stage(Stage.NEARMISS):
            if settings.nearmiss_enabled:
                rows = near_miss_indices(features, labels, settings.nearmiss_k, settings.target_per_class,
                                         self.seed(Stage.NEARMISS))
            else:
                rows = np.arange(len(labels))
            self.report.summaries[Stage.NEARMISS.value] = {
                "kept": int(len(rows)), "theft": int(labels[rows].sum()),
            }
            self.log(Stage.NEARMISS, f"kept {len(rows)} of {len(labels)} training consumers")
        return rows

    def train_sae(self, features: np.ndarray, scaling: MinMaxScaling) -> StackedAutoencoder:
        settings = self.config.autoencoder
        with self.stage(Stage.SAE):
            seed = self.seed(Stage.SAE)
            model = build_sae(features.shape[1], settings.dims, seed)
            model, histories = train_greedy(
                model, features, settings.epochs, settings.batch_size, seed,
                learning_rate=settings.learning_rate, patience=settings.early_stop_patience,
                delta=settings.early_stop_delta, fine_tune_epochs=settings.fine_tune_epochs,
            )
            model.scaling = scaling
            _, retained = reconstruction_error(model, features)
            self.report.summaries[Stage.SAE.value] = {
                "parameters": model.count_params(),
                "epochs": [len(h) for h in histories],
                "retained_variance": retained,
            }
            self.log(Stage.SAE, f"retained variance {retained:.4f}")
            if self.out_dir:
                for path in write_histories(histories, self.out_dir):
                    self.report.artifacts[os.path.basename(path)] = path
        return model

    def augment(self, rows: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Synthetic rows in the space of `rows`: latent codes or scaled raw readings."""
        settings = self.config.augmentation
        with self.stage(Stage.GAN):
            if not settings.enabled or settings.n_samples == 0:
                self.report.summaries[Stage.GAN.value] = {"synthetic": 0, "space": settings.space}
                return np.empty((0, rows.shape[1])), np.empty(0, dtype=np.int64)
            if len(labels) < settings.batch_size:
                batch_size = len(labels) // settings.pac * settings.pac
                self.log(Stage.GAN, f"batch size lowered to {batch_size} for {len(labels)} rows")
                settings = dataclasses.replace(settings, batch_size=batch_size)
            synthetic, synthetic_labels, gan = augment(rows, labels, settings, self.seed(Stage.GAN))
            if settings.space == "raw":
                synthetic = np.clip(synthetic, 0.0, 1.0)
            self.report.summaries[Stage.GAN.value] = {
                "synthetic": int(len(synthetic)), "synthetic_theft": int(synthetic_labels.sum()),
                "modes": [m.n_modes for m in gan.modes], "space": settings.space,
            }
            self.log(Stage.GAN, f"sampled {len(synthetic)} synthetic rows")
            if self.out_dir:
                self.report.artifacts[Config.gan_file] = self._save(gan, Config.gan_file)
        return synthetic, synthetic_labels

    def fit_ensemble(self, features: np.ndarray, labels: np.ndarray) -> EnsembleModel:
        settings = self.config.ensemble
        with self.stage(Stage.ENSEMBLE):
            seed = self.seed(Stage.ENSEMBLE)
            if settings.grid:
                result = grid_search_cv(features, labels, settings.grid, settings.folds, seed, settings,
                                        settings.grid_estimator)
                settings = apply_cell(settings, result.best)
                self.report.summaries["grid"] = result.to_dict()
                self.log(Stage.ENSEMBLE, f"grid search picked {result.best}")
            model = ensemble_fit(features, labels, settings, seed)
            self.report.summaries[Stage.ENSEMBLE.value] = {
                "mode": model.mode.value, "rows": int(len(labels)), "theft": int(labels.sum()),
            }
        return model

    def evaluate(self, models: TrainedModels, features: np.ndarray, labels: np.ndarray) -> MetricsReport:
        with self.stage(Stage.EVALUATE):
            latent = models.sae.encode(features)
            probabilities = models.ensemble.predict_proba(latent)
            metrics = evaluate_scores(labels, probabilities[:, 1], models.ensemble.predict(latent))
            self.log(Stage.EVALUATE, f"recall {metrics.recall:.4f}, mcc {metrics.mcc:.4f}")
        return metrics

    def check_hygiene(self, test_ids: Sequence[str], training_ids: Sequence[str]) -> dict:
        """No training or synthetic row may reach the evaluation set."""
        leaked = set(test_ids) & set(training_ids)
        synthetic = [i for i in test_ids if i.startswith(SYNTHETIC_PREFIX)]
        if leaked or synthetic:
            raise StageError(Stage.EVALUATE.value, f"{len(leaked)} training and {len(synthetic)} synthetic "
                                                   f"rows in the test set")
        return {"test_rows": len(test_ids), "training_rows": len(training_ids), "overlap": 0}

    def _save(self, model, filename: str) -> str:
        path = os.path.join(self.out_dir, filename)
        model.save_as(path)
        return path

    def run(self) -> RunReport:
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)
        matrix = self.impute(self.data)
        matrix = self.zscore(matrix)
        train, test = self.split(matrix)
        train_values, test_values, scaling = self.normalize(train, test)
        train_labels = train.labels.astype(np.int64)
        kept = self.nearmiss(train_values, train_labels)

        fit_rows = kept if self.config.autoencoder.fit_on == "balanced" else np.arange(len(train_labels))
        sae = self.train_sae(train_values[fit_rows], scaling)
        latent = sae.encode(train_values[kept])
        labels = train_labels[kept]
        if self.config.augmentation.space == "raw":
            synthetic, synthetic_labels = self.augment(train_values[kept], labels)
            synthetic = sae.encode(synthetic) if len(synthetic) else np.empty((0, sae.latent_dim))
        else:
            synthetic, synthetic_labels = self.augment(latent, labels)

        training_ids = [train.consumer_ids[i] for i in kept]
        training_ids += [f"{SYNTHETIC_PREFIX}{i}" for i in range(len(synthetic))]
        features = np.vstack([latent, synthetic])
        labels = np.concatenate([labels, synthetic_labels])
        ensemble = self.fit_ensemble(features, labels)

        self.models = TrainedModels(sae, ensemble)
        self.report.summaries["hygiene"] = self.check_hygiene(test.consumer_ids, training_ids)
        self.report.metrics = self.evaluate(self.models, test_values, test.labels.astype(np.int64))
        self.report.log = self.run_log.render()
        if self.out_dir:
            self.persist()
        return self.report

    def persist(self) -> None:
        artifacts = self.report.artifacts
        artifacts[Config.model_file] = self._save(self.models.sae, Config.model_file)
        artifacts[Config.ensemble_file] = self._save(self.models.ensemble, Config.ensemble_file)
        config_path = os.path.join(self.out_dir, Config.config_file)
        with open(config_path, "w", encoding="utf-8") as f:
            f.write(self.config.to_json())
        artifacts[Config.config_file] = config_path
        log_path = os.path.join(self.out_dir, Config.run_log_file)
        self.run_log.write(log_path)
        artifacts[Config.run_log_file] = log_path
        report_path = os.path.join(self.out_dir, Config.report_file)
        artifacts[Config.report_file] = report_path
        self.report.save_as(report_path)


def run_pipeline(config: PipelineConfig, data: ConsumptionMatrix, out_dir: Optional[str] = None,
                 split_seed: Optional[int] = None) -> RunReport:
    return Pipeline(config, data, out_dir, split_seed).run()


def evaluate_report(models_dir: str, data: ConsumptionMatrix, config: Optional[PipelineConfig] = None) -> MetricsReport:
    """Score labelled test data with the models persisted in `models_dir`.

    The autoencoder and ensemble documents are required; a GAN document, when
    present, is loaded too so that a stale schema anywhere in the run is refused.
    """
    config = config or PipelineConfig()
    sae = load_sae(os.path.join(models_dir, Config.model_file))
    ensemble = load_ensemble(os.path.join(models_dir, Config.ensemble_file))
    gan_path = os.path.join(models_dir, Config.gan_file)
    if os.path.exists(gan_path):
        load_gan(gan_path)
    if ensemble.n_features != sae.latent_dim:
        raise InvalidInputError(f"ensemble expects {ensemble.n_features} features but the autoencoder "
                                f"produces {sae.latent_dim}")
    if sae.scaling is None:
        raise InvalidInputError("the persisted autoencoder has no input scaling")
    pipeline = Pipeline(config, data)
    matrix = pipeline.impute(data) if not data.is_complete else data
    features = sae.scaling.transform(matrix.dense(), clip=True)
    return pipeline.evaluate(TrainedModels(sae, ensemble), features, matrix.labels.astype(np.int64))


@dataclass
class RepeatedReport:
    runs: pd.DataFrame
    durations: pd.DataFrame
    resplit: bool

    @property
    def mean(self) -> dict[str, float]:
        return {name: float(value) for name, value in self.runs.drop(columns=["seed", "split_seed"]).mean().items()}

    @property
    def std(self) -> dict[str, float]:
        scores = self.runs.drop(columns=["seed", "split_seed"])
        return {name: float(value) for name, value in scores.std(ddof=0).items()}

    def to_dict(self) -> dict:
        return {
            "repeats": len(self.runs),
            "resplit": self.resplit,
            "mean": self.mean,
            "std": self.std,
            "timing": {name: float(value) for name, value in self.durations.mean().items()},
            "runs": self.runs.to_dict(orient="records"),
        }

    def save_as(self, filename: str) -> None:
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, default=json_default)


def repeat_runs(config: PipelineConfig, data: ConsumptionMatrix, repeats: int = 1,
                resplit: bool = False) -> RepeatedReport:
    """Rerun the pipeline `repeats` times with derived seeds and collect every run's scores.

    Without `resplit` only model training is re-seeded; the test split stays put.
    """
    if repeats < 1:
        raise InvalidInputError(f"repeats must be at least 1, got {repeats}")
    complete = Pipeline(config, data).impute(data) if not data.is_complete else data
    rows, timings = [], []
    for repeat in range(repeats):
        seed = repeat_seed(config.seed, repeat)
        split_seed = seed if resplit else config.seed
        report = run_pipeline(dataclasses.replace(config, seed=seed), complete, split_seed=split_seed)
        rows.append({"seed": seed, "split_seed": split_seed, **report.metrics.scores()})
        timings.append(report.durations)
        logger.info("repeat %d/%d: mcc %.4f", repeat + 1, repeats, report.metrics.mcc)
    return RepeatedReport(pd.DataFrame.from_records(rows), pd.DataFrame.from_records(timings), resplit)


def emit_curves(report: MetricsReport, out_dir: str) -> dict[str, str]:
    """Write roc.csv, pr.csv, their PNG plots and a JSON index; returns the paths by name."""
    if report.roc is None or report.pr is None:
        raise InvalidInputError("the report carries no curve points")
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        index = {}
        for curve, csv_name, area in ((report.roc, Config.roc_csv, report.auc_roc), (report.pr, Config.pr_csv,
                                                                                       report.pr_auc)):
            csv_path = os.path.join(out_dir, csv_name)
            curve.save_csv(csv_path)
            png_path = render_utils.render_curve(curve, os.path.splitext(csv_path)[0] + ".png",
                                                 f"{curve.kind.upper()} area {area:.4f}")
            paths[csv_name] = csv_path
            paths[os.path.basename(png_path)] = png_path
            index[curve.kind] = {"csv": csv_name, "png": os.path.basename(png_path), "points": len(curve),
                                 "area": area}
        index_path = os.path.join(out_dir, Config.curves_index)
        save_json(index_path, index)
        paths[Config.curves_index] = index_path
    except OSError as exc:
        raise StageError(Stage.EVALUATE.value, f"cannot write curves to {out_dir}: {exc}") from exc
    return paths


def split_sweep(config: PipelineConfig, data: ConsumptionMatrix, fractions: Sequence[float] = SWEEP_FRACTIONS,
                augmentation: Sequence[bool] = (True, False)) -> pd.DataFrame:
    """Scores of the pipeline at every (test fraction, augmentation on/off) pair."""
    complete = Pipeline(config, data).impute(data) if not data.is_complete else data
    records = []
    for fraction in fractions:
        for enabled in augmentation:
            settings = dataclasses.replace(config.augmentation, enabled=enabled)
            report = run_pipeline(dataclasses.replace(config, test_fraction=fraction, augmentation=settings), complete)
            records.append({"test_fraction": fraction, "augmentation": enabled, **report.metrics.scores(),
                            "seconds": report.total_seconds})
            logger.info("sweep %.1f (augmentation %s): mcc %.4f", fraction, enabled, report.metrics.mcc)
    return pd.DataFrame.from_records(records)
