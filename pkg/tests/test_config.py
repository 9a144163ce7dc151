import pytest

from config import (
    AugmentationConfig, AutoencoderConfig, Config, EnsembleConfig, GeneratorConfig, PipelineConfig, PreprocessConfig,
)
from exceptions import ConfigError


def test_default_ensemble_hyperparameters():
    assert EnsembleConfig().to_dict() == {
        "mode": "soft-vote",
        "weights": None,
        "forest": {
            "n_estimators": 300, "max_features": "sqrt", "criterion": "gini", "min_samples_leaf": 5,
            "class_weight": "balanced", "max_depth": None,
        },
        "boosting": {
            "objective": "binary:logistic", "learning_rate": 0.03, "n_estimators": 500, "max_depth": 1,
            "subsample": 0.4, "reg_lambda": 1.0, "min_child_weight": 1.0,
        },
        "logistic": {"penalty": "l2", "C": 100.0, "tol": 1e-8, "max_iter": 100},
        "grid": None,
        "grid_estimator": "ensemble",
        "folds": 10,
        "stack_folds": 5,
    }


def test_defaults_of_the_other_stages():
    assert AutoencoderConfig().dims == (512, 256, 128)
    augmentation = AugmentationConfig()
    assert (augmentation.n_samples, augmentation.ratio, augmentation.pac) == (10000, (2, 1), 1)
    assert PipelineConfig().test_fraction == 0.2
    assert GeneratorConfig().theft_fraction == pytest.approx(1 / 11)


def test_json_round_trip():
    config = PipelineConfig(seed=9, test_fraction=0.4)
    config.ensemble.grid = {"forest.n_estimators": [100, 300]}
    config.autoencoder.dims = (64, 32)
    assert PipelineConfig.from_json(config.to_json()) == config
    assert PipelineConfig.from_json(PipelineConfig().to_json()) == PipelineConfig()


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        PipelineConfig.from_dict({"autoencoder": {"depth": 3}})


@pytest.mark.parametrize("config", [
    PipelineConfig(test_fraction=1.0),
    PipelineConfig(preprocess=PreprocessConfig(zscore_axis="diagonal")),
    PipelineConfig(autoencoder=AutoencoderConfig(dims=(64, 128))),
    PipelineConfig(autoencoder=AutoencoderConfig(epochs=101)),
    PipelineConfig(augmentation=AugmentationConfig(batch_size=500, pac=3)),
    PipelineConfig(ensemble=EnsembleConfig(mode="hard")),
    PipelineConfig(ensemble=EnsembleConfig(weights=(1.0, -1.0, 1.0))),
    PipelineConfig(generator=GeneratorConfig(n_days=30)),
])
def test_out_of_range_values(config):
    with pytest.raises(ConfigError):
        config.validate()


def test_errors_name_the_field():
    with pytest.raises(ConfigError, match="pipeline.test_fraction"):
        PipelineConfig(test_fraction=0.0).validate()


def test_project_constants():
    constants = Config.to_dict()
    assert constants["schema_version"] == 1
    assert constants["roc_csv"] == "roc.csv"
    assert "to_dict" not in constants
