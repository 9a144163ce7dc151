"""Mode-specific normalization of numeric columns.

Every column gets a Gaussian mixture. A value is represented by the mode it was
drawn from (one-hot) and its offset from that mode's mean, in units of four
standard deviations and clipped to [-1, 1].
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np  # type: ignore
from scipy.special import logsumexp  # type: ignore
from scipy.stats import norm  # type: ignore
from sklearn.exceptions import ConvergenceWarning  # type: ignore
from sklearn.mixture import BayesianGaussianMixture  # type: ignore

from exceptions import InvalidInputError

logger = logging.getLogger(__name__)

PRUNE_WEIGHT = 0.01
STD_FLOOR = 1e-6
ALPHA_SCALE = 4.0


@dataclass(frozen=True)
class ColumnModes:
    means: np.ndarray
    stds: np.ndarray
    weights: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.means)

    def log_responsibilities(self, values: np.ndarray) -> np.ndarray:
        """(n, modes) log posterior of each mode given the value."""
        values = np.asarray(values, dtype=np.float64)[:, None]
        joint = np.log(self.weights) + norm.logpdf(values, self.means, self.stds)
        return joint - logsumexp(joint, axis=1, keepdims=True)

    def bounds(self) -> tuple[float, float]:
        low = float(np.min(self.means - ALPHA_SCALE * self.stds))
        high = float(np.max(self.means + ALPHA_SCALE * self.stds))
        return low, high

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> ColumnModes:
        return cls(np.asarray(data["means"], dtype=np.float64), np.asarray(data["stds"], dtype=np.float64),
                   np.asarray(data["weights"], dtype=np.float64))


def fit_vgm(column: np.ndarray, max_modes: int = 10, seed: int = 0) -> ColumnModes:
    """Variational mixture with a stick-breaking prior; modes under 1% weight are dropped."""
    column = np.asarray(column, dtype=np.float64).ravel()
    if max_modes < 1:
        raise InvalidInputError(f"max_modes must be >= 1, got {max_modes}")
    if len(column) < max_modes:
        raise InvalidInputError(f"{len(column)} values cannot support {max_modes} modes")
    if not np.isfinite(column).all():
        raise InvalidInputError("mode fitting needs finite values")

    if np.ptp(column) == 0.0:
        return ColumnModes(np.array([column[0]]), np.array([STD_FLOOR]), np.array([1.0]))

    n_components = min(max_modes, len(np.unique(column)))
    mixture = BayesianGaussianMixture(
        n_components=n_components,
        weight_concentration_prior_type="dirichlet_process",
        weight_concentration_prior=0.001,
        max_iter=1000,
        n_init=1,
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        mixture.fit(column[:, None])

    weights = mixture.weights_
    keep = weights >= PRUNE_WEIGHT
    if not keep.any():
        keep = weights == weights.max()
    means = mixture.means_[keep, 0]
    stds = np.maximum(np.sqrt(mixture.covariances_[keep].reshape(-1)), STD_FLOOR)
    weights = weights[keep] / weights[keep].sum()
    order = np.argsort(means, kind="stable")
    logger.debug("fitted %d of %d modes", len(order), n_components)
    return ColumnModes(means[order], stds[order], weights[order])


def fit_modes(features: np.ndarray, max_modes: int = 10, seed: int = 0) -> list[ColumnModes]:
    features = np.asarray(features, dtype=np.float64)
    return [fit_vgm(features[:, c], max_modes, seed) for c in range(features.shape[1])]


def encoded_width(modes: Sequence[ColumnModes]) -> int:
    return sum(1 + m.n_modes for m in modes)


@dataclass(frozen=True)
class MsnEncoded:
    """Normalized offsets and chosen mode per cell, both shaped (rows, columns)."""

    alpha: np.ndarray
    mode: np.ndarray

    def to_matrix(self, modes: Sequence[ColumnModes]) -> np.ndarray:
        """GAN layout: per column (alpha + 1) / 2 followed by the mode one-hot."""
        blocks = []
        for c, column in enumerate(modes):
            blocks.append(((self.alpha[:, c] + 1.0) / 2.0)[:, None])
            blocks.append(np.eye(column.n_modes)[self.mode[:, c]])
        return np.hstack(blocks)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, modes: Sequence[ColumnModes]) -> MsnEncoded:
        """Inverse of `to_matrix`; the strongest indicator of each block picks the mode."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != encoded_width(modes):
            raise InvalidInputError(f"expected {encoded_width(modes)} encoded columns, got shape {matrix.shape}")
        alpha = np.empty((len(matrix), len(modes)))
        mode = np.empty((len(matrix), len(modes)), dtype=np.int64)
        start = 0
        for c, column in enumerate(modes):
            alpha[:, c] = np.clip(2.0 * matrix[:, start] - 1.0, -1.0, 1.0)
            indicators = matrix[:, start + 1:start + 1 + column.n_modes]
            if (indicators.max(axis=1) <= 0.0).any():
                raise InvalidInputError(f"no mode indicated for column {c}")
            mode[:, c] = np.argmax(indicators, axis=1)
            start += 1 + column.n_modes
        return cls(alpha, mode)


def msn_encode(rows: np.ndarray, modes: Sequence[ColumnModes], seed: int = 0) -> MsnEncoded:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != len(modes):
        raise InvalidInputError(f"{len(modes)} fitted columns but rows have {rows.shape[1]}")
    rng = np.random.default_rng(seed)
    alpha = np.empty(rows.shape)
    mode = np.empty(rows.shape, dtype=np.int64)
    for c, column in enumerate(modes):
        probabilities = np.exp(column.log_responsibilities(rows[:, c]))
        # inverse-CDF draw, one uniform per cell
        cumulative = np.cumsum(probabilities, axis=1)
        draws = rng.random(len(rows))[:, None] * cumulative[:, -1:]
        chosen = np.minimum((cumulative < draws).sum(axis=1), column.n_modes - 1)
        mode[:, c] = chosen
        offset = (rows[:, c] - column.means[chosen]) / (ALPHA_SCALE * column.stds[chosen])
        alpha[:, c] = np.clip(offset, -1.0, 1.0)
    return MsnEncoded(alpha, mode)


def msn_decode(encoded: MsnEncoded, modes: Sequence[ColumnModes]) -> np.ndarray:
    alpha = np.atleast_2d(encoded.alpha)
    mode = np.atleast_2d(encoded.mode)
    out = np.empty(alpha.shape)
    for c, column in enumerate(modes):
        chosen = mode[:, c]
        if chosen.min() < 0 or chosen.max() >= column.n_modes:
            raise InvalidInputError(f"no mode indicated for column {c}")
        out[:, c] = alpha[:, c] * ALPHA_SCALE * column.stds[chosen] + column.means[chosen]
    return np.maximum(out, 0.0)
