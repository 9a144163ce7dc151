from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np  # type: ignore

from exceptions import InvalidInputError


@dataclass
class OptimizerState:
    step: int = 0
    first: list[np.ndarray] = field(default_factory=list)
    second: list[np.ndarray] = field(default_factory=list)


class Optimizer:
    def __init__(self, learning_rate: float):
        if learning_rate < 0:
            raise InvalidInputError(f"learning rate must be non-negative, got {learning_rate}")
        self.learning_rate = learning_rate
        self.state = OptimizerState()

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """Update `params` in place."""
        if len(params) != len(grads):
            raise InvalidInputError(f"{len(params)} parameters but {len(grads)} gradients")
        self.state.step += 1
        self._update(params, grads)

    def _update(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        raise NotImplementedError()


class GradientDescent(Optimizer):
    def _update(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        for param, grad in zip(params, grads):
            param -= self.learning_rate * grad


class Adam(Optimizer):
    """Adaptive moment estimation with bias-corrected moments."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        super().__init__(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon

    def _update(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        state = self.state
        if not state.first:
            state.first = [np.zeros_like(p) for p in params]
            state.second = [np.zeros_like(p) for p in params]
        correction1 = 1.0 - self.beta1 ** state.step
        correction2 = 1.0 - self.beta2 ** state.step
        for param, grad, m, v in zip(params, grads, state.first, state.second):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad ** 2
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)
