"""Random forest, boosted stumps and logistic regression combined by soft voting or stacking."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np  # type: ignore

from config import EnsembleConfig
from exceptions import ConfigError, InvalidInputError
from learners.base_learner import Learner, check_training_set, decide
from learners.boosting import BoostedStumpsModel, train_gbt_stumps
from learners.forest import ForestModel, train_random_forest
from learners.logistic import LogisticModel, train_logistic_regression
from neural.serialization import check_version, load_json, save_json, with_version
from ntl_types import LearnerKind, VotingMode

logger = logging.getLogger(__name__)

LEARNERS = {
    LearnerKind.FOREST: ForestModel,
    LearnerKind.BOOSTING: BoostedStumpsModel,
    LearnerKind.LOGISTIC: LogisticModel,
}


def normalized_weights(weights: Optional[Sequence[float]], members: int = 3) -> np.ndarray:
    if weights is None:
        return np.full(members, 1.0 / members)
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != members or (weights < 0).any() or weights.sum() <= 0:
        raise InvalidInputError(f"need {members} non-negative voting weights, got {weights.tolist()}")
    return weights / weights.sum()


def soft_vote(member_probabilities: Sequence[np.ndarray], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Weighted average of the members' (n, 2) probability matrices."""
    weights = normalized_weights(weights, len(member_probabilities))
    return sum(w * p for w, p in zip(weights, member_probabilities))


class EnsembleModel:
    def __init__(self, forest: ForestModel, boosting: BoostedStumpsModel, logistic: LogisticModel,
                 weights: Optional[Sequence[float]] = None, mode: VotingMode = VotingMode.SOFT_VOTE):
        self.forest = forest
        self.boosting = boosting
        self.logistic = logistic
        self.mode = VotingMode(mode)
        self.weights = normalized_weights(weights)

    @property
    def members(self) -> list[Learner]:
        return [self.forest, self.boosting, self.logistic]

    @property
    def n_features(self) -> int:
        return self.forest.n_features

    def member_probabilities(self, features: np.ndarray) -> list[np.ndarray]:
        if self.mode is VotingMode.STACKED:
            return [self.forest.predict_proba(features), self.boosting.predict_proba(features)]
        return [member.predict_proba(features) for member in self.members]

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise InvalidInputError(f"ensemble expects {self.n_features} features, got shape {features.shape}")
        members = self.member_probabilities(features)
        if self.mode is VotingMode.STACKED:
            return self.logistic.predict_proba(meta_features(members))
        return soft_vote(members, self.weights)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return decide(self.predict_proba(features))

    def to_document(self) -> dict:
        return with_version("ensemble", {
            "mode": self.mode.value,
            "weights": self.weights.tolist(),
            "members": [member.to_dict() for member in self.members],
        })

    def save_as(self, filename: str) -> None:
        save_json(filename, self.to_document())


def meta_features(member_probabilities: Sequence[np.ndarray]) -> np.ndarray:
    return np.column_stack([p[:, 1] for p in member_probabilities])


def stratified_folds(labels: np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """Validation indices of k stratified folds.

    Each class is shuffled and dealt round-robin, continuing where the
    previous class stopped, so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=2)
    if k < 2 or k > counts.min():
        raise InvalidInputError(f"{k} folds need 2 <= k <= smallest class count {counts.min()}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=np.int64)
    dealt = 0
    for label in (0, 1):
        members = rng.permutation(np.flatnonzero(labels == label))
        assignment[members] = (dealt + np.arange(len(members))) % k
        dealt += len(members)
    return [np.flatnonzero(assignment == fold) for fold in range(k)]


def out_of_fold_probabilities(features: np.ndarray, labels: np.ndarray, config: EnsembleConfig,
                              seed: int) -> np.ndarray:
    """Class-1 probabilities of forest and boosting, each row predicted by models that never saw it."""
    meta = np.empty((len(labels), 2))
    for fold, rows in enumerate(stratified_folds(labels, config.stack_folds, seed)):
        train = np.setdiff1d(np.arange(len(labels)), rows)
        forest = train_random_forest(features[train], labels[train], config.forest, seed + fold)
        boosting = train_gbt_stumps(features[train], labels[train], config.boosting, seed + fold)
        meta[rows] = meta_features([forest.predict_proba(features[rows]), boosting.predict_proba(features[rows])])
    return meta


def ensemble_fit(features: np.ndarray, labels: np.ndarray, config: Optional[EnsembleConfig] = None,
                 seed: int = 0) -> EnsembleModel:
    config = config or EnsembleConfig()
    features, labels = check_training_set(features, labels)
    mode = VotingMode(config.mode)
    forest = train_random_forest(features, labels, config.forest, seed)
    boosting = train_gbt_stumps(features, labels, config.boosting, seed)
    if mode is VotingMode.STACKED:
        meta = out_of_fold_probabilities(features, labels, config, seed)
        logistic = train_logistic_regression(meta, labels, config.logistic)
    else:
        logistic = train_logistic_regression(features, labels, config.logistic)
    logger.info("ensemble (%s): %d trees, %d boosting rounds", mode.value, len(forest.trees), boosting.n_rounds)
    return EnsembleModel(forest, boosting, logistic, config.weights, mode)


def ensemble_predict_proba(model: EnsembleModel, features: np.ndarray) -> np.ndarray:
    return model.predict_proba(features)


def ensemble_from_document(document: dict) -> EnsembleModel:
    document = check_version(document, "ensemble")
    members = [LEARNERS[LearnerKind(m["kind"])].from_dict(m) for m in document["members"]]
    return EnsembleModel(*members, weights=document["weights"], mode=VotingMode(document["mode"]))


def load_ensemble(filename: str) -> EnsembleModel:
    return ensemble_from_document(load_json(filename))


@dataclass
class GridResult:
    best: dict[str, Any]
    best_accuracy: float
    cells: list[tuple[dict[str, Any], float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "best_accuracy": self.best_accuracy,
            "cells": [{"params": params, "accuracy": accuracy} for params, accuracy in self.cells],
        }


def _order_key(value: Any) -> tuple:
    return (value is None, 0 if value is None else value)


def grid_cells(grid: dict[str, Sequence[Any]]) -> list[dict[str, Any]]:
    """Every lattice cell, in lexicographic order of (sorted keys, sorted values)."""
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise InvalidInputError("the parameter grid is empty")
    keys = sorted(grid)
    axes = [sorted(grid[key], key=_order_key) for key in keys]
    return [dict(zip(keys, cell)) for cell in itertools.product(*axes)]


def apply_cell(config: EnsembleConfig, cell: dict[str, Any]) -> EnsembleConfig:
    """A copy of `config` with dotted keys such as `forest.n_estimators` set."""
    data = config.to_dict()
    for key, value in cell.items():
        target = data
        *path, name = key.split(".")
        for part in path:
            if not isinstance(target.get(part), dict):
                raise ConfigError(f"unknown grid parameter {key!r}")
            target = target[part]
        if name not in target:
            raise ConfigError(f"unknown grid parameter {key!r}")
        target[name] = value
    updated = EnsembleConfig.from_dict(data)
    updated.validate()
    return updated


def _fit_estimator(estimator: str, features: np.ndarray, labels: np.ndarray, config: EnsembleConfig, seed: int):
    if estimator == "forest":
        return train_random_forest(features, labels, config.forest, seed)
    if estimator == "boosting":
        return train_gbt_stumps(features, labels, config.boosting, seed)
    if estimator == "logistic":
        return train_logistic_regression(features, labels, config.logistic)
    if estimator == "ensemble":
        return ensemble_fit(features, labels, config, seed)
    raise ConfigError(f"unknown grid estimator {estimator!r}")


def grid_search_cv(
        features: np.ndarray,
        labels: np.ndarray,
        grid: dict[str, Sequence[Any]],
        k: int = 10,
        seed: int = 0,
        base: Optional[EnsembleConfig] = None,
        estimator: str = "ensemble",
) -> GridResult:
    """Mean stratified k-fold validation accuracy of every cell.

    The best cell wins; ties go to the lexicographically first cell. The same
    folds are used for every cell.
    """
    base = base or EnsembleConfig()
    features, labels = check_training_set(features, labels)
    cells = grid_cells(grid)
    folds = stratified_folds(labels, k, seed)
    everything = np.arange(len(labels))
    scored = []
    for cell in cells:
        config = apply_cell(base, cell)
        accuracies = []
        for rows in folds:
            train = np.setdiff1d(everything, rows)
            model = _fit_estimator(estimator, features[train], labels[train], config, seed)
            accuracies.append(float(np.mean(model.predict(features[rows]) == labels[rows])))
        scored.append((cell, float(np.mean(accuracies))))
        logger.debug("grid cell %s: accuracy %.4f", cell, scored[-1][1])
    best_index = max(range(len(scored)), key=lambda i: (scored[i][1], -i))
    best, accuracy = scored[best_index]
    logger.info("grid search: best %s with accuracy %.4f", best, accuracy)
    return GridResult(best, accuracy, scored)
