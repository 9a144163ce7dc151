from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np  # type: ignore

from config import ForestParams
from exceptions import InvalidInputError
from learners.base_learner import Learner, balanced_class_weight, check_training_set
from learners.tree import DecisionTree
from ntl_types import LearnerKind

logger = logging.getLogger(__name__)


def feature_subset_size(rule: str, n_features: int) -> int:
    if rule == "sqrt":
        return max(1, math.isqrt(n_features))
    return n_features


def draw_bootstraps(n_samples: int, n_estimators: int, seed: int = 0) -> list[np.ndarray]:
    """Row indices of every tree's bootstrap resample."""
    rng = np.random.default_rng(seed)
    return [rng.integers(0, n_samples, n_samples) for _ in range(n_estimators)]


class ForestModel(Learner):
    kind = LearnerKind.FOREST

    def __init__(self, trees: Sequence[DecisionTree], params: ForestParams, class_weight: np.ndarray,
                 n_features: int):
        self.trees = list(trees)
        self.params = params
        self.class_weight = np.asarray(class_weight, dtype=np.float64)
        self.n_features = n_features

    def predict_positive(self, features: np.ndarray) -> np.ndarray:
        if not self.trees:
            return np.full(len(features), 0.5)
        return np.mean([tree.predict_positive(features) for tree in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "params": self.params.to_dict(),
            "class_weight": self.class_weight.tolist(),
            "n_features": self.n_features,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ForestModel:
        return cls([DecisionTree.from_dict(t) for t in data["trees"]], ForestParams.from_dict(data["params"]),
                   np.asarray(data["class_weight"]), data["n_features"])


def train_random_forest(
        features: np.ndarray,
        labels: np.ndarray,
        params: Optional[ForestParams] = None,
        seed: int = 0,
        bootstraps: Optional[Sequence[np.ndarray]] = None,
) -> ForestModel:
    """Bagged Gini trees. `bootstraps` overrides the seeded resamples."""
    params = params or ForestParams()
    features, labels = check_training_set(features, labels)
    if len(labels) < 2 * params.min_samples_leaf:
        raise InvalidInputError(f"{len(labels)} samples cannot fill two leaves of {params.min_samples_leaf}")
    n, d = features.shape
    if bootstraps is None:
        bootstraps = draw_bootstraps(n, params.n_estimators, seed)
    class_weight = balanced_class_weight(labels) if params.class_weight == "balanced" else np.ones(2)
    max_features = feature_subset_size(params.max_features, d)
    trees = []
    for index, rows in enumerate(bootstraps):
        tree = DecisionTree(params.max_depth, params.min_samples_leaf, max_features)
        tree.fit(features, labels, np.bincount(rows, minlength=n), class_weight,
                 np.random.default_rng([seed, index]))
        trees.append(tree)
    logger.debug("forest: %d trees, mean depth %.1f", len(trees),
                 np.mean([t.depth for t in trees]) if trees else 0.0)
    return ForestModel(trees, params, class_weight, d)

