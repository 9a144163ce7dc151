"""Class-weighted Gini decision trees over integer sample multiplicities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np  # type: ignore

from exceptions import InvalidInputError
from learners.base_learner import Learner
from neural.serialization import decode_array, encode_array
from ntl_types import LearnerKind

LEAF = -1


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    impurity: float


def gini(weight0: np.ndarray, weight1: np.ndarray) -> np.ndarray:
    total = weight0 + weight1
    with np.errstate(invalid="ignore", divide="ignore"):
        impurity = 1.0 - (weight0 ** 2 + weight1 ** 2) / total ** 2
    return np.where(total > 0, impurity, 0.0)


def midpoint(low: float, high: float) -> float:
    mid = (low + high) / 2.0
    return mid if low <= mid < high else low


def best_split(
        features: np.ndarray,
        labels: np.ndarray,
        counts: np.ndarray,
        class_weight: np.ndarray,
        candidates: Sequence[int],
        min_samples_leaf: int = 1,
) -> Optional[Split]:
    """Lowest weighted child Gini over midpoints between consecutive distinct values.

    Ties go to the lowest feature index, then the lowest threshold. `counts`
    are per-row multiplicities; a child must hold `min_samples_leaf` of them.
    """
    n0 = counts * (labels == 0)
    n1 = counts * (labels == 1)
    total_count = int(counts.sum())
    total_weight = n0.sum() * class_weight[0] + n1.sum() * class_weight[1]
    best: Optional[Split] = None
    for feature in sorted(candidates):
        column = features[:, feature]
        order = np.argsort(column, kind="stable")
        values = column[order]
        left0 = np.cumsum(n0[order])[:-1]
        left1 = np.cumsum(n1[order])[:-1]
        left_count = left0 + left1
        valid = (values[:-1] < values[1:]) & (left_count >= min_samples_leaf) & \
                (total_count - left_count >= min_samples_leaf)
        if not valid.any():
            continue
        w0, w1 = left0 * class_weight[0], left1 * class_weight[1]
        r0, r1 = (n0.sum() - left0) * class_weight[0], (n1.sum() - left1) * class_weight[1]
        impurity = ((w0 + w1) * gini(w0, w1) + (r0 + r1) * gini(r0, r1)) / total_weight
        impurity = np.where(valid, impurity, np.inf)
        index = int(np.argmin(impurity))
        if best is None or impurity[index] < best.impurity:
            best = Split(feature, midpoint(values[index], values[index + 1]), float(impurity[index]))
    return best


class DecisionTree(Learner):
    kind = LearnerKind.TREE

    def __init__(self, max_depth: Optional[int] = None, min_samples_leaf: int = 1,
                 max_features: Optional[int] = None):
        if min_samples_leaf < 1:
            raise InvalidInputError(f"min_samples_leaf must be >= 1, got {min_samples_leaf}")
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.feature = np.array([LEAF])
        self.threshold = np.zeros(1)
        self.left = np.array([LEAF])
        self.right = np.array([LEAF])
        self.value = np.full(1, 0.5)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def fit(self, features: np.ndarray, labels: np.ndarray, counts: Optional[np.ndarray] = None,
            class_weight: Optional[np.ndarray] = None,
            rng: Optional[np.random.Generator] = None) -> DecisionTree:
        """Grow the tree; nodes are numbered in depth-first order."""
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        counts = np.ones(len(labels), dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
        class_weight = np.ones(2) if class_weight is None else np.asarray(class_weight, dtype=np.float64)
        rng = rng or np.random.default_rng(0)
        self.n_features = features.shape[1]
        n_candidates = self.n_features if self.max_features is None else max(1, min(self.max_features,
                                                                                    self.n_features))
        feature, threshold, left, right, value = [], [], [], [], []

        def grow(rows: np.ndarray, depth: int) -> int:
            node = len(feature)
            row_counts = counts[rows]
            w0 = float(row_counts[labels[rows] == 0].sum()) * class_weight[0]
            w1 = float(row_counts[labels[rows] == 1].sum()) * class_weight[1]
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(w1 / (w0 + w1))
            if w0 == 0.0 or w1 == 0.0 or (self.max_depth is not None and depth >= self.max_depth):
                return node
            if int(row_counts.sum()) < 2 * self.min_samples_leaf:
                return node
            order = rng.permutation(self.n_features)
            split = best_split(features[rows], labels[rows], row_counts, class_weight, order[:n_candidates],
                               self.min_samples_leaf)
            if split is None and n_candidates < self.n_features:
                split = best_split(features[rows], labels[rows], row_counts, class_weight, order[n_candidates:],
                                   self.min_samples_leaf)
            if split is None:
                return node
            goes_left = features[rows, split.feature] <= split.threshold
            feature[node], threshold[node] = split.feature, split.threshold
            left[node] = grow(rows[goes_left], depth + 1)
            right[node] = grow(rows[~goes_left], depth + 1)
            return node

        grow(np.flatnonzero(counts > 0), 0)
        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value)
        return self

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(len(features), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            goes_left = features[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(goes_left, self.left[current], self.right[current])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict_positive(self, features: np.ndarray) -> np.ndarray:
        return self.value[self.apply(features)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "nodes": {name: encode_array(getattr(self, name))
                      for name in ("feature", "threshold", "left", "right", "value")},
        }

    @classmethod
    def from_dict(cls, data: dict) -> DecisionTree:
        tree = cls(data["max_depth"], data["min_samples_leaf"], data["max_features"])
        tree.n_features = data["n_features"]
        nodes = data["nodes"]
        tree.feature = decode_array(nodes["feature"]).astype(np.int64)
        tree.threshold = decode_array(nodes["threshold"])
        tree.left = decode_array(nodes["left"]).astype(np.int64)
        tree.right = decode_array(nodes["right"]).astype(np.int64)
        tree.value = decode_array(nodes["value"])
        return tree
