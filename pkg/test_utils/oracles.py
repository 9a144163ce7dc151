"""Slow, obviously-correct reference implementations used by the tests."""
from __future__ import annotations

import math
from datetime import date, timedelta
from itertools import product
from typing import Iterator, Sequence

import numpy as np  # type: ignore

from data_model import ConsumptionMatrix


def warping_paths(n: int, m: int) -> Iterator[list[tuple[int, int]]]:
    """Every monotone warping path from (0, 0) to (n-1, m-1)."""
    def walk(i: int, j: int, path: list[tuple[int, int]]):
        path = path + [(i, j)]
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                yield from walk(i + di, j + dj, path)

    yield from walk(0, 0, [])


def dtw_by_paths(a: Sequence[float], b: Sequence[float]) -> float:
    return min(
        sum((a[i] - b[j]) ** 2 for i, j in path)
        for path in warping_paths(len(a), len(b))
    )


def sequences(alphabet: Sequence[float], max_length: int) -> Iterator[tuple[float, ...]]:
    for length in range(1, max_length + 1):
        yield from product(alphabet, repeat=length)


def scan_gaps(mask: Sequence[bool]) -> list[tuple[int, int]]:
    gaps = []
    start = None
    for j, missing in enumerate(list(mask) + [False]):
        if missing and start is None:
            start = j
        elif not missing and start is not None:
            gaps.append((start, j - start))
            start = None
    return gaps


def near_miss_by_distances(features: np.ndarray, labels: np.ndarray, k: int, target: int) -> set[int]:
    """Version-1 Near-Miss majority selection plus the whole minority, by brute force."""
    counts = np.bincount(labels, minlength=2)
    minority_class = 0 if counts[0] < counts[1] else 1
    minority = [i for i in range(len(labels)) if labels[i] == minority_class]
    scored = []
    for i in range(len(labels)):
        if labels[i] == minority_class:
            continue
        nearest = sorted(math.dist(features[i], features[j]) for j in minority)[:k]
        scored.append((sum(nearest) / k, i))
    kept = [i for _, i in sorted(scored)[:target]]
    return set(kept) | set(minority)


def mann_whitney_auc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Probability that a random positive outranks a random negative, ties counted half."""
    positives = [s for y, s in zip(labels, scores) if y == 1]
    negatives = [s for y, s in zip(labels, scores) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in product(positives, negatives))
    return wins / (len(positives) * len(negatives))


def daily_dates(start: date, n: int) -> tuple[date, ...]:
    return tuple(start + timedelta(days=i) for i in range(n))


def matrix_from_rows(rows: Sequence[Sequence[float]], start: date = date(2015, 6, 1),
                     labels: Sequence[int] = ()) -> ConsumptionMatrix:
    """Build a matrix from nested lists in which NaN marks a missing reading."""
    values = np.asarray(rows, dtype=np.float64)
    labels = list(labels) or [0] * len(values)
    ids = [f"c{i}" for i in range(len(values))]
    return ConsumptionMatrix.from_dense(ids, labels, daily_dates(start, values.shape[1]), values)


def gini_split_by_enumeration(features: np.ndarray, labels: Sequence[int], weights: Sequence[float] = (1.0, 1.0),
                              min_samples_leaf: int = 1) -> tuple[int, float, float]:
    """(feature, threshold, impurity) trying every midpoint of every feature."""
    best = None
    n = len(labels)
    for feature in range(features.shape[1]):
        values = sorted(set(features[:, feature]))
        for low, high in zip(values, values[1:]):
            threshold = (low + high) / 2
            sides = [[i for i in range(n) if (features[i, feature] <= threshold) == left] for left in (True, False)]
            if min(len(side) for side in sides) < min_samples_leaf:
                continue
            total = sum(weights[labels[i]] for i in range(n))
            impurity = 0.0
            for side in sides:
                w0 = sum(weights[0] for i in side if labels[i] == 0)
                w1 = sum(weights[1] for i in side if labels[i] == 1)
                impurity += (w0 + w1) / total * (1 - (w0 / (w0 + w1)) ** 2 - (w1 / (w0 + w1)) ** 2)
            if best is None or impurity < best[2] - 1e-12:
                best = (feature, threshold, impurity)
    return best


def logistic_by_gradient_descent(features: np.ndarray, labels: np.ndarray, C: float,
                                 tol: float = 1e-10) -> np.ndarray:
    """Fixed-step gradient descent on the regularized mean log-loss; returns (w..., b)."""
    design = np.hstack([features, np.ones((len(features), 1))])
    step = 1.0 / (np.linalg.norm(design, 2) ** 2 / (4 * len(labels)) + 1.0 / C)
    theta = np.zeros(design.shape[1])
    for _ in range(1_000_000):
        p = 1.0 / (1.0 + np.exp(-design @ theta))
        grad = design.T @ (p - labels) / len(labels)
        grad[:-1] += theta[:-1] / C
        if np.linalg.norm(grad) < tol:
            break
        theta -= step * grad
    return theta


def confusion_by_counting(truth: Sequence[int], predicted: Sequence[int]) -> dict[str, int]:
    counts = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for t, p in zip(truth, predicted):
        key = ("t" if t == p else "f") + ("p" if p == 1 else "n")
        counts[key] += 1
    return counts


def pr_auc_by_sweep(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Step-wise area: sum over distinct thresholds of (recall gain) * precision."""
    positives = sum(labels)
    area, previous_recall = 0.0, 0.0
    for threshold in sorted(set(scores), reverse=True):
        flagged = [y for y, s in zip(labels, scores) if s >= threshold]
        recall = sum(flagged) / positives
        precision = sum(flagged) / len(flagged)
        area += (recall - previous_recall) * precision
        previous_recall = recall
    return area
