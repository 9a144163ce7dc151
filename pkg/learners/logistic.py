from __future__ import annotations

import logging
from typing import Optional

import numpy as np  # type: ignore
from scipy.linalg import solve  # type: ignore
from scipy.special import expit  # type: ignore

from config import LogisticParams
from learners.base_learner import Learner, check_training_set
from ntl_types import LearnerKind

logger = logging.getLogger(__name__)


class LogisticModel(Learner):
    kind = LearnerKind.LOGISTIC

    def __init__(self, weight: np.ndarray, bias: float, C: float = 100.0, converged: bool = True, n_iter: int = 0):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = float(bias)
        self.C = C
        self.converged = converged
        self.n_iter = n_iter
        self.n_features = len(self.weight)

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        return self.check_features(features) @ self.weight + self.bias

    def predict_positive(self, features: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(features))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "weight": self.weight.tolist(), "bias": self.bias, "C": self.C,
                "converged": self.converged, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, data: dict) -> LogisticModel:
        return cls(np.asarray(data["weight"]), data["bias"], data["C"], data["converged"], data["n_iter"])


def objective(theta: np.ndarray, design: np.ndarray, labels: np.ndarray, C: float):
    """Mean log-loss + (1/C) * |w|^2 / 2 with its gradient; the bias is the last entry and unpenalized."""
    z = design @ theta
    weight = theta[:-1]
    value = np.mean(np.logaddexp(0.0, z) - labels * z) + 0.5 / C * weight @ weight
    grad = design.T @ (expit(z) - labels) / len(labels)
    grad[:-1] += weight / C
    return value, grad


def hessian(theta: np.ndarray, design: np.ndarray, labels: np.ndarray, C: float) -> np.ndarray:
    p = expit(design @ theta)
    out = (design * (p * (1.0 - p))[:, None]).T @ design / len(labels)
    out[np.diag_indices(len(theta) - 1)] += 1.0 / C
    return out


def train_logistic_regression(features: np.ndarray, labels: np.ndarray,
                              params: Optional[LogisticParams] = None) -> LogisticModel:
    """Damped Newton iterations until the gradient norm drops below `tol`.

    Running out of iterations is logged; the last iterate is still returned.
    """
    params = params or LogisticParams()
    features, labels = check_training_set(features, labels)
    design = np.hstack([features, np.ones((len(features), 1))])
    targets = labels.astype(np.float64)
    theta = np.zeros(design.shape[1])
    value, grad = objective(theta, design, targets, params.C)
    iteration = 0
    while np.linalg.norm(grad) >= params.tol and iteration < params.max_iter:
        iteration += 1
        step = -solve(hessian(theta, design, targets, params.C), grad, assume_a="pos")
        slope = grad @ step
        scale = 1.0
        while True:
            candidate = theta + scale * step
            new_value, new_grad = objective(candidate, design, targets, params.C)
            if new_value <= value + 1e-4 * scale * slope + 1e-12 * abs(value) or scale < 1e-10:
                break
            scale /= 2.0
        theta, value, grad = candidate, new_value, new_grad
    converged = bool(np.linalg.norm(grad) < params.tol)
    if not converged:
        logger.warning("logistic regression stopped after %d iterations with gradient norm %.3g",
                       iteration, np.linalg.norm(grad))
    return LogisticModel(theta[:-1], theta[-1], params.C, converged, iteration)
