from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Any, Optional

from exceptions import ConfigError


class Config:
    # --- persistence
    schema_version = 1
    model_file = "sae.json"
    gan_file = "gan.json"
    ensemble_file = "ensemble.json"
    config_file = "config.json"
    report_file = "report.json"
    run_log_file = "run_log.txt"

    # --- curves
    roc_csv = "roc.csv"
    pr_csv = "pr.csv"
    curves_index = "curves.json"
    plot_width = 480
    plot_height = 480
    plot_margin = 48

    # --- logging
    log_format = "%(asctime)s %(levelname)s %(name)s: %(message)s"
    log_width = 100

    @classmethod
    def to_dict(cls) -> dict:
        return {x: y for (x, y) in cls.__dict__.items() if x[:2] != "__" and x != "to_dict"}


class ConfigGroup:
    """Mixin for dataclass parameter groups that round-trip through JSON."""

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, ConfigGroup):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict):
        defaults = cls()
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for name, value in data.items():
            default = getattr(defaults, name)
            if isinstance(default, ConfigGroup):
                value = type(default).from_dict(value)
            elif isinstance(value, list):
                value = tuple(value)
            kwargs[name] = value
        return cls(**kwargs)

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, ConfigGroup):
                value.validate()


def _check(condition: bool, group: str, name: str, value: object, expected: str) -> None:
    if not condition:
        raise ConfigError(f"{group}.{name}={value!r} must be {expected}")


@dataclass
class ImputationConfig(ConfigGroup):
    search_size: int = 1
    min_gap: int = 3
    two_sided: bool = True
    season_start_month: int = 12
    workers: int = 1

    def validate(self) -> None:
        _check(self.search_size >= 1, "imputation", "search_size", self.search_size, ">= 1")
        _check(self.min_gap >= 3, "imputation", "min_gap", self.min_gap, ">= 3")
        _check(1 <= self.season_start_month <= 12, "imputation", "season_start_month",
               self.season_start_month, "a month number")
        _check(self.workers >= 1, "imputation", "workers", self.workers, ">= 1")


@dataclass
class PreprocessConfig(ConfigGroup):
    zscore_enabled: bool = True
    zscore_threshold: float = 3.0
    zscore_axis: str = "column"
    nearmiss_enabled: bool = True
    nearmiss_k: int = 3
    target_per_class: Optional[int] = None

    def validate(self) -> None:
        _check(self.zscore_threshold > 0, "preprocess", "zscore_threshold", self.zscore_threshold, "> 0")
        _check(self.zscore_axis in ("column", "row", "global"), "preprocess", "zscore_axis",
               self.zscore_axis, "one of column/row/global")
        _check(self.nearmiss_k >= 1, "preprocess", "nearmiss_k", self.nearmiss_k, ">= 1")
        _check(self.target_per_class is None or self.target_per_class >= 1, "preprocess",
               "target_per_class", self.target_per_class, ">= 1")


@dataclass
class AutoencoderConfig(ConfigGroup):
    dims: tuple[int, ...] = (512, 256, 128)
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    early_stop_patience: int = 10
    early_stop_delta: float = 1e-6
    fine_tune_epochs: int = 0
    fit_on: str = "train"

    def validate(self) -> None:
        _check(len(self.dims) >= 1 and all(d >= 1 for d in self.dims), "autoencoder", "dims", self.dims,
               "positive")
        _check(all(a > b for a, b in zip(self.dims, self.dims[1:])), "autoencoder", "dims", self.dims,
               "strictly decreasing")
        _check(0 <= self.epochs <= 100, "autoencoder", "epochs", self.epochs, "in [0, 100]")
        _check(self.batch_size >= 2, "autoencoder", "batch_size", self.batch_size, ">= 2")
        _check(self.learning_rate > 0, "autoencoder", "learning_rate", self.learning_rate, "> 0")
        _check(self.fit_on in ("train", "balanced"), "autoencoder", "fit_on", self.fit_on, "train or balanced")


@dataclass
class AugmentationConfig(ConfigGroup):
    enabled: bool = True
    space: str = "latent"
    n_samples: int = 10000
    ratio: tuple[int, int] = (2, 1)
    pac: int = 1
    epochs: int = 300
    batch_size: int = 500
    critic_steps: int = 5
    gp_weight: float = 10.0
    noise_dim: int = 128
    hidden_dim: int = 256
    max_modes: int = 10
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9

    def validate(self) -> None:
        _check(self.space in ("latent", "raw"), "augmentation", "space", self.space, "latent or raw")
        _check(self.n_samples >= 0, "augmentation", "n_samples", self.n_samples, ">= 0")
        _check(len(self.ratio) == 2 and min(self.ratio) >= 0 and sum(self.ratio) > 0, "augmentation", "ratio",
               self.ratio, "two non-negative integers")
        _check(1 <= self.pac <= 10, "augmentation", "pac", self.pac, "in [1, 10]")
        _check(self.batch_size % self.pac == 0, "augmentation", "batch_size", self.batch_size,
               "divisible by pac")
        _check(self.critic_steps >= 1, "augmentation", "critic_steps", self.critic_steps, ">= 1")
        _check(self.gp_weight >= 0, "augmentation", "gp_weight", self.gp_weight, ">= 0")
        _check(self.max_modes >= 1, "augmentation", "max_modes", self.max_modes, ">= 1")


@dataclass
class ForestParams(ConfigGroup):
    n_estimators: int = 300
    max_features: str = "sqrt"
    criterion: str = "gini"
    min_samples_leaf: int = 5
    class_weight: Optional[str] = "balanced"
    max_depth: Optional[int] = None

    def validate(self) -> None:
        _check(self.n_estimators >= 0, "forest", "n_estimators", self.n_estimators, ">= 0")
        _check(self.max_features in ("sqrt", "all"), "forest", "max_features", self.max_features, "sqrt or all")
        _check(self.criterion == "gini", "forest", "criterion", self.criterion, "gini")
        _check(self.min_samples_leaf >= 1, "forest", "min_samples_leaf", self.min_samples_leaf, ">= 1")
        _check(self.class_weight in (None, "balanced"), "forest", "class_weight", self.class_weight,
               "None or balanced")


@dataclass
class BoostingParams(ConfigGroup):
    objective: str = "binary:logistic"
    learning_rate: float = 0.03
    n_estimators: int = 500
    max_depth: int = 1
    subsample: float = 0.4
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0

    def validate(self) -> None:
        _check(self.objective == "binary:logistic", "boosting", "objective", self.objective, "binary:logistic")
        _check(self.max_depth == 1, "boosting", "max_depth", self.max_depth, "1")
        _check(0 < self.subsample <= 1, "boosting", "subsample", self.subsample, "in (0, 1]")
        _check(self.learning_rate > 0, "boosting", "learning_rate", self.learning_rate, "> 0")
        _check(self.n_estimators >= 0, "boosting", "n_estimators", self.n_estimators, ">= 0")


@dataclass
class LogisticParams(ConfigGroup):
    penalty: str = "l2"
    C: float = 100.0
    tol: float = 1e-8
    max_iter: int = 100

    def validate(self) -> None:
        _check(self.penalty == "l2", "logistic", "penalty", self.penalty, "l2")
        _check(self.C > 0, "logistic", "C", self.C, "> 0")
        _check(self.max_iter >= 1, "logistic", "max_iter", self.max_iter, ">= 1")


@dataclass
class EnsembleConfig(ConfigGroup):
    mode: str = "soft-vote"
    weights: Optional[tuple[float, ...]] = None
    forest: ForestParams = field(default_factory=ForestParams)
    boosting: BoostingParams = field(default_factory=BoostingParams)
    logistic: LogisticParams = field(default_factory=LogisticParams)
    grid: Optional[dict] = None
    grid_estimator: str = "ensemble"
    folds: int = 10
    stack_folds: int = 5

    def validate(self) -> None:
        super().validate()
        _check(self.mode in ("soft-vote", "stacked"), "ensemble", "mode", self.mode, "soft-vote or stacked")
        if self.weights is not None:
            _check(len(self.weights) == 3 and min(self.weights) >= 0 and sum(self.weights) > 0, "ensemble",
                   "weights", self.weights, "three non-negative numbers")
        _check(self.folds >= 2, "ensemble", "folds", self.folds, ">= 2")
        _check(self.stack_folds >= 2, "ensemble", "stack_folds", self.stack_folds, ">= 2")


@dataclass
class GeneratorConfig(ConfigGroup):
    """Parameters of the synthetic consumption generator."""

    n_consumers: int = 800
    n_days: int = 365
    theft_fraction: float = 1 / 11
    missing_fraction: float = 0.25
    start_date: str = "2014-01-01"
    level_log_mean: float = 1.5
    level_log_sigma: float = 0.5
    seasonal_amplitude: tuple[float, float] = (0.2, 0.5)
    weekly_amplitude: tuple[float, float] = (0.0, 0.2)
    noise_sigma: float = 0.1
    attack_interval_days: tuple[int, int] = (90, 200)
    attack_scale: tuple[float, float] = (0.0, 0.5)
    spike_count: tuple[int, int] = (5, 20)
    spike_factor: tuple[float, float] = (2.0, 4.0)
    gap_length: tuple[int, int] = (1, 30)
    scale_weight: int = 60
    zero_weight: int = 40
    spike_chance: float = 0.3
    max_missing_share: float = 0.5

    def validate(self) -> None:
        _check(self.n_consumers >= 1, "generator", "n_consumers", self.n_consumers, ">= 1")
        _check(self.n_days >= 90, "generator", "n_days", self.n_days, ">= 90")
        _check(0 <= self.theft_fraction < 1, "generator", "theft_fraction", self.theft_fraction, "in [0, 1)")
        _check(0 <= self.missing_fraction <= self.max_missing_share, "generator", "missing_fraction",
               self.missing_fraction, "in [0, max_missing_share]")
        _check(self.noise_sigma >= 0, "generator", "noise_sigma", self.noise_sigma, ">= 0")
        _check(0 <= self.attack_scale[0] <= self.attack_scale[1] <= 0.5, "generator", "attack_scale",
               self.attack_scale, "within [0, 0.5]")
        _check(1 <= self.gap_length[0] <= self.gap_length[1], "generator", "gap_length", self.gap_length,
               "an increasing positive pair")


@dataclass
class PipelineConfig(ConfigGroup):
    seed: int = 0
    test_fraction: float = 0.2
    imputation: ImputationConfig = field(default_factory=ImputationConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)

    def validate(self) -> None:
        super().validate()
        _check(0 < self.test_fraction < 1, "pipeline", "test_fraction", self.test_fraction, "in (0, 1)")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> PipelineConfig:
        config = cls.from_dict(json.loads(text))
        config.validate()
        return config

    @classmethod
    def load(cls, path: str) -> PipelineConfig:
        with open(path, encoding="utf-8") as f:
            return cls.from_json(f.read())


if __name__ == '__main__':
    import pprint

    pprint.pp(Config.to_dict())
    pprint.pp(PipelineConfig().to_dict())
