"""Second-order gradient boosting of depth-1 stumps on the logistic loss."""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np  # type: ignore
from scipy.special import expit  # type: ignore

from config import BoostingParams
from learners.base_learner import Learner, check_training_set
from learners.tree import LEAF, midpoint
from neural.serialization import decode_array, encode_array
from ntl_types import LearnerKind

logger = logging.getLogger(__name__)


def leaf_weight(gradients: np.ndarray, hessians: np.ndarray, reg_lambda: float = 1.0) -> float:
    return -float(np.sum(gradients)) / (float(np.sum(hessians)) + reg_lambda)


def log_loss(labels: np.ndarray, raw: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, raw) - labels * raw))


def draw_subsamples(n_samples: int, rounds: int, fraction: float, seed: int = 0) -> list[np.ndarray]:
    """Rows of every round, drawn without replacement."""
    size = max(1, int(round(fraction * n_samples)))
    rng = np.random.default_rng(seed)
    return [np.sort(rng.choice(n_samples, size, replace=False)) for _ in range(rounds)]


class BoostedStumpsModel(Learner):
    kind = LearnerKind.BOOSTING

    def __init__(self, base_score: float, learning_rate: float, n_features: int,
                 params: Optional[BoostingParams] = None):
        self.base_score = base_score
        self.learning_rate = learning_rate
        self.n_features = n_features
        self.params = params or BoostingParams()
        self.feature = np.empty(0, dtype=np.int64)
        self.threshold = np.empty(0)
        self.left_value = np.empty(0)
        self.right_value = np.empty(0)

    @property
    def n_rounds(self) -> int:
        return len(self.feature)

    def add_stump(self, feature: int, threshold: float, left_value: float, right_value: float) -> None:
        self.feature = np.append(self.feature, feature)
        self.threshold = np.append(self.threshold, threshold)
        self.left_value = np.append(self.left_value, left_value)
        self.right_value = np.append(self.right_value, right_value)

    def stump_output(self, features: np.ndarray, index: int) -> np.ndarray:
        feature = self.feature[index]
        if feature == LEAF:
            return np.full(len(features), self.left_value[index])
        return np.where(features[:, feature] <= self.threshold[index], self.left_value[index],
                        self.right_value[index])

    def raw_score(self, features: np.ndarray) -> np.ndarray:
        features = self.check_features(features)
        raw = np.full(len(features), self.base_score)
        for index in range(self.n_rounds):
            raw += self.learning_rate * self.stump_output(features, index)
        return raw

    def predict_positive(self, features: np.ndarray) -> np.ndarray:
        return expit(self.raw_score(features))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "params": self.params.to_dict(),
            "stumps": {name: encode_array(getattr(self, name))
                       for name in ("feature", "threshold", "left_value", "right_value")},
        }

    @classmethod
    def from_dict(cls, data: dict) -> BoostedStumpsModel:
        model = cls(data["base_score"], data["learning_rate"], data["n_features"],
                    BoostingParams.from_dict(data["params"]))
        stumps = data["stumps"]
        model.feature = decode_array(stumps["feature"]).astype(np.int64)
        model.threshold = decode_array(stumps["threshold"])
        model.left_value = decode_array(stumps["left_value"])
        model.right_value = decode_array(stumps["right_value"])
        return model


def best_stump(
        sorted_values: np.ndarray,
        order: np.ndarray,
        gradients: np.ndarray,
        hessians: np.ndarray,
        reg_lambda: float,
        min_child_weight: float,
) -> Optional[tuple[int, float, float, float]]:
    """(feature, threshold, left weight, right weight) of the largest positive gain.

    `order` holds, per feature, the selected rows in ascending feature order
    and `sorted_values` the matching feature values.
    """
    g_total, h_total = gradients[order[:, 0]].sum(), hessians[order[:, 0]].sum()
    parent = g_total ** 2 / (h_total + reg_lambda)
    best, best_gain = None, 0.0
    for feature in range(order.shape[1]):
        rows = order[:, feature]
        values = sorted_values[:, feature]
        g_left = np.cumsum(gradients[rows])[:-1]
        h_left = np.cumsum(hessians[rows])[:-1]
        g_right, h_right = g_total - g_left, h_total - h_left
        valid = (values[:-1] < values[1:]) & (h_left >= min_child_weight) & (h_right >= min_child_weight)
        if not valid.any():
            continue
        gain = g_left ** 2 / (h_left + reg_lambda) + g_right ** 2 / (h_right + reg_lambda) - parent
        gain = np.where(valid, gain, -np.inf)
        index = int(np.argmax(gain))
        if gain[index] > best_gain:
            best_gain = gain[index]
            best = (feature, midpoint(values[index], values[index + 1]),
                    -g_left[index] / (h_left[index] + reg_lambda), -g_right[index] / (h_right[index] + reg_lambda))
    return best


def train_gbt_stumps(
        features: np.ndarray,
        labels: np.ndarray,
        params: Optional[BoostingParams] = None,
        seed: int = 0,
        subsamples: Optional[Sequence[np.ndarray]] = None,
) -> BoostedStumpsModel:
    """`subsamples` overrides the seeded per-round row draws."""
    params = params or BoostingParams()
    features, labels = check_training_set(features, labels)
    n, d = features.shape
    prior = labels.mean()
    model = BoostedStumpsModel(float(np.log(prior / (1.0 - prior))), params.learning_rate, d, params)
    if subsamples is None:
        subsamples = draw_subsamples(n, params.n_estimators, params.subsample, seed)

    presorted = np.argsort(features, axis=0, kind="stable")
    raw = np.full(n, model.base_score)
    for rows in subsamples:
        p = expit(raw)
        gradients, hessians = p - labels, p * (1.0 - p)
        chosen = np.zeros(n, dtype=bool)
        chosen[rows] = True
        order = _restrict(presorted, chosen)
        sorted_values = np.take_along_axis(features, order, axis=0)
        stump = best_stump(sorted_values, order, gradients, hessians, params.reg_lambda, params.min_child_weight)
        if stump is None:
            constant = leaf_weight(gradients[rows], hessians[rows], params.reg_lambda)
            model.add_stump(LEAF, 0.0, constant, constant)
        else:
            model.add_stump(*stump)
        raw += params.learning_rate * model.stump_output(features, model.n_rounds - 1)
    logger.debug("boosting: %d rounds, training log-loss %.4g", model.n_rounds, log_loss(labels, raw))
    return model


def _restrict(presorted: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    """Keep the chosen rows of every presorted column, order preserved."""
    mask = chosen[presorted]
    size = int(chosen.sum())
    return presorted.T[mask.T].reshape(presorted.shape[1], size).T
