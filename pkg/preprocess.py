from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np  # type: ignore
from scipy.spatial.distance import cdist  # type: ignore

from data_model import ConsumptionMatrix
from exceptions import InvalidInputError
from ntl_types import ZScoreAxis

logger = logging.getLogger(__name__)

DISTANCE_CHUNK = 1024


def zscores(values: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Z = (X - mean) / std, with Z = 0 wherever std is 0."""
    safe = np.where(std > 0, std, 1.0)
    return np.where(std > 0, (values - mean) / safe, 0.0)


def _statistics(values: np.ndarray, axis: ZScoreAxis) -> tuple[np.ndarray, np.ndarray]:
    if axis is ZScoreAxis.COLUMN:
        return values.mean(axis=0), values.std(axis=0)
    if axis is ZScoreAxis.ROW:
        return values.mean(axis=1, keepdims=True), values.std(axis=1, keepdims=True)
    return np.array(values.mean()), np.array(values.std())


@dataclass(frozen=True)
class ZScoreReport:
    mean: np.ndarray
    std: np.ndarray
    dropped: tuple[int, ...]
    threshold: float
    axis: ZScoreAxis = ZScoreAxis.COLUMN

    def scores(self, values: np.ndarray) -> np.ndarray:
        """Z-scores of `values` under the recorded statistics.

        Row statistics belong to individual rows, so they are recomputed for
        whatever rows are given.
        """
        values = np.asarray(values, dtype=np.float64)
        if self.axis is ZScoreAxis.ROW:
            return zscores(values, *_statistics(values, ZScoreAxis.ROW))
        return zscores(values, self.mean, self.std)

    def outlier_rows(self, values: np.ndarray) -> np.ndarray:
        if len(values) == 0:
            return np.zeros(0, dtype=bool)
        return np.abs(self.scores(values)).max(axis=1) > self.threshold

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.value,
            "threshold": self.threshold,
            "mean": np.ravel(self.mean).tolist(),
            "std": np.ravel(self.std).tolist(),
            "dropped": list(self.dropped),
        }


def zscore_filter(
        matrix: ConsumptionMatrix,
        threshold: float = 3.0,
        axis: Union[str, ZScoreAxis] = ZScoreAxis.COLUMN,
) -> tuple[ConsumptionMatrix, ZScoreReport]:
    """Drop every row holding at least one cell with |Z| above `threshold`."""
    axis = ZScoreAxis(axis)
    if matrix.n_consumers == 0 or matrix.n_days == 0:
        raise InvalidInputError("Z-score filtering needs a non-empty matrix")
    values = matrix.dense()
    mean, std = _statistics(values, axis)
    report = ZScoreReport(mean, std, (), float(threshold), axis)
    outliers = report.outlier_rows(values)
    dropped = tuple(int(i) for i in np.flatnonzero(outliers))
    report = ZScoreReport(mean, std, dropped, float(threshold), axis)
    logger.info("z-score filter dropped %d of %d rows", len(dropped), matrix.n_consumers)
    return matrix.select_rows(np.flatnonzero(~outliers)), report


def _class_counts(labels: np.ndarray) -> tuple[int, int]:
    classes = set(np.unique(labels).tolist())
    if not classes <= {0, 1}:
        raise InvalidInputError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise InvalidInputError("near-miss needs both classes present")
    counts = np.bincount(labels, minlength=2)
    minority = 0 if counts[0] < counts[1] else 1
    return minority, 1 - minority


def mean_nearest_distances(majority: np.ndarray, minority: np.ndarray, k: int) -> np.ndarray:
    """Average Euclidean distance from each majority row to its `k` nearest minority rows."""
    out = np.empty(len(majority))
    for start in range(0, len(majority), DISTANCE_CHUNK):
        distances = cdist(majority[start:start + DISTANCE_CHUNK], minority, "euclidean")
        if k < distances.shape[1]:
            distances = np.partition(distances, k - 1, axis=1)[:, :k]
        out[start:start + DISTANCE_CHUNK] = np.sort(distances, axis=1).mean(axis=1)
    return out


def near_miss_indices(
        features: np.ndarray,
        labels: np.ndarray,
        k: int = 3,
        target_per_class: Optional[int] = None,
        seed: int = 0,
) -> np.ndarray:
    """Row indices kept by version-1 Near-Miss, in ascending order."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if len(features) != len(labels):
        raise InvalidInputError(f"{len(features)} rows but {len(labels)} labels")
    minority_class, majority_class = _class_counts(labels)
    minority = np.flatnonzero(labels == minority_class)
    majority = np.flatnonzero(labels == majority_class)
    target = len(minority) if target_per_class is None else int(target_per_class)
    if k < 1 or k > len(minority):
        raise InvalidInputError(f"k={k} must be between 1 and the minority count {len(minority)}")
    if target < 1 or target > len(minority):
        raise InvalidInputError(f"target_per_class={target} exceeds the minority count {len(minority)}")

    distances = mean_nearest_distances(features[majority], features[minority], k)
    order = np.argsort(distances, kind="stable")
    kept_majority = majority[order[:target]]
    if len(minority) > target:
        rng = np.random.default_rng(seed)
        minority = np.sort(rng.choice(minority, size=target, replace=False))
    return np.sort(np.concatenate([kept_majority, minority]))


def near_miss_undersample(
        features: np.ndarray,
        labels: np.ndarray,
        k: int = 3,
        target_per_class: Optional[int] = None,
        seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    indices = near_miss_indices(features, labels, k, target_per_class, seed)
    features = np.asarray(features)
    labels = np.asarray(labels)
    logger.info("near-miss kept %d of %d rows", len(indices), len(labels))
    return features[indices], labels[indices]
