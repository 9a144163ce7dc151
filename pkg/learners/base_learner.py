from __future__ import annotations

import copy
from typing import Optional, TypeVar

import numpy as np  # type: ignore

from exceptions import InvalidInputError
from ntl_types import LearnerKind

T = TypeVar("T", bound="Learner")


class Learner:
    """A binary classifier; class 1 is theft."""

    kind: LearnerKind
    n_features: Optional[int] = None

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """(n, 2) class probabilities; rows sum to 1."""
        p1 = self.predict_positive(self.check_features(features))
        return np.column_stack([1.0 - p1, p1])

    def predict_positive(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def predict(self, features: np.ndarray) -> np.ndarray:
        return decide(self.predict_proba(features))

    def check_features(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or (self.n_features is not None and features.shape[1] != self.n_features):
            raise InvalidInputError(f"{self.kind.value} expects {self.n_features} features, got shape {features.shape}")
        return features

    def to_dict(self) -> dict:
        raise NotImplementedError()

    def copy(self: T) -> T:
        return copy.deepcopy(self)


def decide(probabilities: np.ndarray) -> np.ndarray:
    """Argmax over the two classes; a tie goes to class 0."""
    return (probabilities[:, 1] > probabilities[:, 0]).astype(np.int64)


def check_training_set(features: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or len(features) != len(labels):
        raise InvalidInputError(f"{len(labels)} labels for a feature matrix of shape {features.shape}")
    if not np.isfinite(features).all():
        raise InvalidInputError("training features must be finite")
    if not np.isin(labels, (0, 1)).all():
        raise InvalidInputError("labels must be 0 (genuine) or 1 (theft)")
    labels = labels.astype(np.int64)
    if len(np.unique(labels)) < 2:
        raise InvalidInputError("single-class input: both classes must be present")
    return features, labels


def balanced_class_weight(labels: np.ndarray) -> np.ndarray:
    """n_samples / (2 * class count) for classes 0 and 1."""
    counts = np.bincount(labels, minlength=2)
    return len(labels) / (2.0 * counts)
