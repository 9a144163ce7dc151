from __future__ import annotations

import copy
from typing import Optional, TypeVar

import numpy as np  # type: ignore
from scipy.special import expit  # type: ignore

from exceptions import InvalidInputError
from ntl_types import LayerKind

T = TypeVar("T", bound="Layer")


class Layer:
    kind: LayerKind
    trainable_names: tuple[str, ...] = ()
    state_names: tuple[str, ...] = ()

    def __init__(self) -> None:
        self._cache: Optional[tuple] = None
        self.grads: dict[str, np.ndarray] = {}

    @property
    def in_dim(self) -> Optional[int]:
        """Input width, or None for element-wise layers."""
        return None

    @property
    def out_dim(self) -> Optional[int]:
        return self.in_dim

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError()

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def _cached(self) -> tuple:
        if self._cache is None:
            raise InvalidInputError(f"{self.kind.value} backward called before forward")
        return self._cache

    def _check_width(self, x: np.ndarray) -> None:
        if x.ndim != 2 or (self.in_dim is not None and x.shape[1] != self.in_dim):
            raise InvalidInputError(f"{self.kind.value} expects {self.in_dim} columns, got shape {x.shape}")

    def parameters(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in self.trainable_names]

    def gradients(self) -> list[np.ndarray]:
        return [self.grads.get(name, np.zeros_like(getattr(self, name))) for name in self.trainable_names]

    def arrays(self) -> dict[str, np.ndarray]:
        """Every persisted array, trainable or not."""
        return {name: getattr(self, name) for name in self.state_names}

    def count_params(self) -> int:
        return sum(int(a.size) for a in self.arrays().values())

    def spec(self) -> dict:
        return {"kind": self.kind.value}

    def copy(self: T) -> T:
        return copy.deepcopy(self)


class Dense(Layer):
    kind = LayerKind.DENSE
    trainable_names = ("weight", "bias")
    state_names = ("weight", "bias")

    def __init__(self, in_dim: int, out_dim: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise InvalidInputError(f"dense layer dimensions must be positive, got {in_dim}x{out_dim}")
        rng = rng or np.random.default_rng(0)
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.weight = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        self.bias = np.zeros(out_dim)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._check_width(x)
        self._cache = (x,)
        return x @ self.weight + self.bias

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, = self._cached()
        self.grads = {"weight": x.T @ grad, "bias": grad.sum(axis=0)}
        return grad @ self.weight.T

    def spec(self) -> dict:
        return {"kind": self.kind.value, "in_dim": self.in_dim, "out_dim": self.out_dim}


class BatchNorm(Layer):
    """Per-feature batch normalization; running statistics count as parameters."""

    kind = LayerKind.BATCHNORM
    trainable_names = ("gamma", "beta")
    state_names = ("gamma", "beta", "running_mean", "running_var")

    def __init__(self, dim: int, momentum: float = 0.99, epsilon: float = 1e-5):
        super().__init__()
        if dim < 1:
            raise InvalidInputError(f"batch norm dimension must be positive, got {dim}")
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    @property
    def in_dim(self) -> int:
        return self.gamma.shape[0]

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._check_width(x)
        if training:
            if len(x) < 2:
                raise InvalidInputError("batch norm in training mode needs at least 2 rows")
            mean, var = x.mean(axis=0), x.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        normalized = (x - mean) * inv_std
        self._cache = (normalized, inv_std, training)
        return self.gamma * normalized + self.beta

    def backward(self, grad: np.ndarray) -> np.ndarray:
        normalized, inv_std, training = self._cached()
        self.grads = {"gamma": (grad * normalized).sum(axis=0), "beta": grad.sum(axis=0)}
        d_norm = grad * self.gamma
        if not training:
            return d_norm * inv_std
        n = len(grad)
        return inv_std / n * (
            n * d_norm - d_norm.sum(axis=0) - normalized * (d_norm * normalized).sum(axis=0)
        )

    def spec(self) -> dict:
        return {"kind": self.kind.value, "dim": self.in_dim, "momentum": self.momentum, "epsilon": self.epsilon}


class ReLU(Layer):
    kind = LayerKind.RELU

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._check_width(x)
        mask = x > 0
        self._cache = (mask,)
        return np.where(mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        mask, = self._cached()
        return grad * mask

    @property
    def mask(self) -> np.ndarray:
        return self._cached()[0]


class Sigmoid(Layer):
    kind = LayerKind.SIGMOID

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._check_width(x)
        out = expit(x)
        self._cache = (out,)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        out, = self._cached()
        return grad * out * (1.0 - out)


def layer_from_spec(spec: dict) -> Layer:
    kind = LayerKind(spec["kind"])
    if kind is LayerKind.DENSE:
        return Dense(int(spec["in_dim"]), int(spec["out_dim"]))
    if kind is LayerKind.BATCHNORM:
        return BatchNorm(int(spec["dim"]), float(spec["momentum"]), float(spec["epsilon"]))
    if kind is LayerKind.RELU:
        return ReLU()
    return Sigmoid()
