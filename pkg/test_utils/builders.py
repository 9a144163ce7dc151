"""Small configurations and datasets that keep pipeline tests fast."""
from __future__ import annotations

from config import (
    AugmentationConfig, AutoencoderConfig, BoostingParams, EnsembleConfig, ForestParams, GeneratorConfig,
    PipelineConfig,
)
from data_model import ConsumptionMatrix
from synthetic import generate_synthetic_dataset


def small_pipeline_config(seed: int = 0, **kwargs) -> PipelineConfig:
    return PipelineConfig(
        seed=seed,
        autoencoder=AutoencoderConfig(dims=(32, 16), epochs=5, batch_size=16, learning_rate=5e-3),
        augmentation=AugmentationConfig(n_samples=60, epochs=2, batch_size=20, critic_steps=2, noise_dim=8,
                                        hidden_dim=16, max_modes=3),
        ensemble=EnsembleConfig(forest=ForestParams(n_estimators=10), boosting=BoostingParams(n_estimators=20)),
        generator=GeneratorConfig(n_consumers=120, n_days=120, theft_fraction=0.2, missing_fraction=0.02),
        **kwargs,
    )


def small_dataset(config: PipelineConfig, seed: int = 0) -> ConsumptionMatrix:
    settings = config.generator
    matrix, _ = generate_synthetic_dataset(settings.n_consumers, settings.n_days, settings.theft_fraction,
                                           settings.missing_fraction, seed, settings)
    return matrix
