"""Synthetic smart-meter data with planted theft and missing-reading runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional

import numpy as np  # type: ignore

from config import GeneratorConfig
from data_model import ConsumptionMatrix
from exceptions import InvalidInputError
from ntl_types import AttackKind
from ranged_value import Range

logger = logging.getLogger(__name__)

YEAR_DAYS = 365.25


@dataclass
class GroundTruth:
    """What the generator planted: clean readings, labels and attacks per consumer."""

    clean: np.ndarray
    labels: np.ndarray
    attacks: list[list[str]] = field(default_factory=list)

    @property
    def theft_rows(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 1)

    def to_dict(self) -> dict:
        return {
            "n_consumers": int(len(self.labels)),
            "n_theft": int(self.labels.sum()),
            "attacks": {kind.value: sum(kind.value in row for row in self.attacks) for kind in AttackKind},
        }


def attack_chances(config: GeneratorConfig) -> list[tuple[AttackKind, int]]:
    """Weighted table of the attack that lowers a theft row's consumption."""
    return [(AttackKind.SCALE, config.scale_weight), (AttackKind.ZERO, config.zero_weight)]


def choose_attacks(config: GeneratorConfig, rng: np.random.Generator) -> list[AttackKind]:
    table = attack_chances(config)
    kinds = [kind for kind, _ in table]
    weights = np.array([weight for _, weight in table], dtype=np.float64)
    attacks = [kinds[rng.choice(len(kinds), p=weights / weights.sum())]]
    if rng.random() < config.spike_chance:
        attacks.append(AttackKind.SPIKES)
    return attacks


def genuine_rows(n_consumers: int, dates: tuple[date, ...], config: GeneratorConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Level x (1 + yearly cosine + weekly sine) x lognormal noise."""
    day_of_year = np.array([d.timetuple().tm_yday for d in dates], dtype=np.float64)
    weekday = np.array([d.weekday() for d in dates], dtype=np.float64)
    level = rng.lognormal(config.level_log_mean, config.level_log_sigma, size=(n_consumers, 1))
    seasonal = Range(*config.seasonal_amplitude).sample(rng, n_consumers)[:, None]
    phase = rng.uniform(0.0, YEAR_DAYS, size=(n_consumers, 1))
    weekly = Range(*config.weekly_amplitude).sample(rng, n_consumers)[:, None]
    week_phase = rng.uniform(0.0, 2 * np.pi, size=(n_consumers, 1))
    shape = (1.0
             + seasonal * np.cos(2 * np.pi * (day_of_year - phase) / YEAR_DAYS)
             + weekly * np.sin(2 * np.pi * weekday / 7 + week_phase))
    noise = rng.lognormal(0.0, config.noise_sigma, size=(n_consumers, len(dates)))
    return level * shape * noise


def apply_attack(row: np.ndarray, kind: AttackKind, config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    out = row.copy()
    n_days = len(row)
    if kind is AttackKind.SPIKES:
        days = rng.choice(n_days, size=min(n_days, Range(*config.spike_count).sample_int(rng)), replace=False)
        out[days] *= Range(*config.spike_factor).sample(rng, len(days))
        return out
    length = min(n_days, Range(*config.attack_interval_days).sample_int(rng))
    start = int(rng.integers(0, n_days - length + 1))
    if kind is AttackKind.ZERO:
        out[start:start + length] = 0.0
    else:
        out[start:start + length] *= Range(*config.attack_scale).sample(rng)
    return out


def inject_missing(values: np.ndarray, fraction: float, config: GeneratorConfig,
                   rng: np.random.Generator) -> np.ndarray:
    """Mask runs of readings until `fraction` of all cells is missing.

    No row loses more than `config.max_missing_share` of its readings.
    """
    n_rows, n_days = values.shape
    mask = np.zeros(values.shape, dtype=bool)
    remaining = int(round(fraction * values.size))
    row_cap = int(config.max_missing_share * n_days)
    if remaining > n_rows * row_cap:
        raise InvalidInputError(f"cannot mask {fraction:.0%} of the readings with at most "
                                f"{config.max_missing_share:.0%} per consumer")
    per_row = np.zeros(n_rows, dtype=np.int64)
    gap = Range(*config.gap_length)
    while remaining > 0:
        row = int(rng.integers(0, n_rows))
        length = min(gap.sample_int(rng), remaining, row_cap - per_row[row])
        if length <= 0:
            continue
        start = int(rng.integers(0, n_days - length + 1))
        run = mask[row, start:start + length]
        added = length - int(run.sum())
        run[:] = True
        per_row[row] += added
        remaining -= added
    return mask


def generate_synthetic_dataset(
        n_consumers: int,
        n_days: int,
        theft_fraction: float = 1 / 11,
        missing_fraction: float = 0.25,
        seed: int = 0,
        config: Optional[GeneratorConfig] = None,
        start: Optional[date] = None,
) -> tuple[ConsumptionMatrix, GroundTruth]:
    """A labelled consumption matrix plus the generator's ground truth."""
    config = config or GeneratorConfig()
    if n_days < 90:
        raise InvalidInputError(f"{n_days} days is shorter than one season")
    if n_consumers < 1:
        raise InvalidInputError("at least one consumer is needed")
    if not 0 <= theft_fraction < 1:
        raise InvalidInputError(f"theft fraction {theft_fraction} is outside [0, 1)")
    if not 0 <= missing_fraction < 1:
        raise InvalidInputError(f"missing fraction {missing_fraction} is outside [0, 1)")
    start = start or date.fromisoformat(config.start_date)
    rng = np.random.default_rng(seed)
    dates = tuple(start + timedelta(days=i) for i in range(n_days))

    clean = genuine_rows(n_consumers, dates, config, rng)
    labels = np.zeros(n_consumers, dtype=np.int64)
    labels[rng.choice(n_consumers, size=int(round(n_consumers * theft_fraction)), replace=False)] = 1
    attacks: list[list[str]] = [[] for _ in range(n_consumers)]
    for row in np.flatnonzero(labels):
        for kind in choose_attacks(config, rng):
            clean[row] = apply_attack(clean[row], kind, config, rng)
            attacks[row].append(kind.value)

    mask = inject_missing(clean, missing_fraction, config, rng)
    ids = tuple(f"C{index:05d}" for index in range(n_consumers))
    matrix = ConsumptionMatrix(ids, labels, dates, np.ma.MaskedArray(clean, mask=mask))
    truth = GroundTruth(clean, labels, attacks)
    logger.info("generated %d consumers x %d days: %d theft, %.1f%% missing", n_consumers, n_days,
                int(labels.sum()), 100.0 * mask.mean())
    return matrix, truth


def dataset_from_config(config: GeneratorConfig, seed: int = 0) -> tuple[ConsumptionMatrix, GroundTruth]:
    return generate_synthetic_dataset(config.n_consumers, config.n_days, config.theft_fraction,
                                      config.missing_fraction, seed, config)
