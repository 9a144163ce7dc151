"""Feed-forward networks built from the fixed layer set, losses and training steps."""
from __future__ import annotations

import copy
import logging
from typing import Iterable, Optional, Sequence, Union

import numpy as np  # type: ignore

from exceptions import DivergenceError, InvalidInputError
from neural.layers import BatchNorm, Dense, Layer, ReLU
from ntl_types import Loss

logger = logging.getLogger(__name__)

BCE_CLIP = 1e-7


class NeuralNet:
    def __init__(self, layers: Iterable[Layer], name: str = "net"):
        self.layers = list(layers)
        self.name = name
        self.training = True
        self._forwarded = False
        width = None
        for layer in self.layers:
            if layer.in_dim is not None:
                if width is not None and layer.in_dim != width:
                    raise InvalidInputError(
                        f"{name}: {layer.kind.value} expects {layer.in_dim} inputs after a width of {width}"
                    )
                width = layer.out_dim

    @property
    def input_dim(self) -> Optional[int]:
        return next((layer.in_dim for layer in self.layers if layer.in_dim is not None), None)

    @property
    def output_dim(self) -> Optional[int]:
        return next((layer.out_dim for layer in reversed(self.layers) if layer.out_dim is not None), None)

    def forward(self, x: np.ndarray, training: Optional[bool] = None) -> np.ndarray:
        training = self.training if training is None else training
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or (self.input_dim is not None and x.shape[1] != self.input_dim):
            raise InvalidInputError(f"{self.name} expects {self.input_dim} columns, got shape {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training)
        self._forwarded = True
        return x

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, training=False)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Back-propagate `grad` (d loss / d output); returns d loss / d input."""
        if not self._forwarded:
            raise InvalidInputError(f"{self.name}: backward called before forward")
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.gradients()]

    def count_params(self) -> int:
        return sum(layer.count_params() for layer in self.layers)

    def batchnorm_state(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(l.running_mean.copy(), l.running_var.copy()) for l in self.layers if isinstance(l, BatchNorm)]

    def restore_batchnorm_state(self, state: Sequence[tuple[np.ndarray, np.ndarray]]) -> None:
        for layer, (mean, var) in zip((l for l in self.layers if isinstance(l, BatchNorm)), state):
            layer.running_mean, layer.running_var = mean.copy(), var.copy()

    def copy(self) -> NeuralNet:
        return copy.deepcopy(self)

    def describe(self) -> list[str]:
        return [f"{layer.kind.value} {layer.spec()} params={layer.count_params()}" for layer in self.layers]

    def input_gradient(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """d sum(output) / d input of a Dense/ReLU chain with one output column.

        Also returns the signal entering each layer's backward pass, which
        `penalty_gradients` needs.
        """
        self._check_piecewise_linear()
        out = self.forward(x, training=False)
        grad = np.ones_like(out)
        signals = []
        for layer in reversed(self.layers):
            signals.append(grad)
            grad = layer.backward(grad)
        signals.reverse()
        return grad, signals

    def penalty_gradients(self, upstream: np.ndarray, signals: list[np.ndarray]) -> list[np.ndarray]:
        """Parameter gradients of a loss on the input gradient.

        `upstream` is d loss / d (input gradient). Activation masks are
        constant almost everywhere, so bias gradients vanish.
        """
        self._check_piecewise_linear()
        out: list[np.ndarray] = []
        adjoint = upstream
        for layer, signal in zip(self.layers, signals):
            if isinstance(layer, Dense):
                out.extend([adjoint.T @ signal, np.zeros_like(layer.bias)])
                adjoint = adjoint @ layer.weight
            else:
                adjoint = adjoint * layer.mask
        return out

    def _check_piecewise_linear(self) -> None:
        if not all(isinstance(layer, (Dense, ReLU)) for layer in self.layers):
            raise InvalidInputError(f"{self.name}: input gradients need a Dense/ReLU network")
        if self.output_dim != 1:
            raise InvalidInputError(f"{self.name}: input gradients need a single output column")


def loss_and_grad(loss: Union[str, Loss], output: np.ndarray, target: Optional[np.ndarray]) -> tuple[float, np.ndarray]:
    loss = Loss(loss)
    if loss is Loss.RAW_MEAN:
        return float(output.mean()), np.full(output.shape, 1.0 / output.size)
    if target is None or np.shape(target) != output.shape:
        raise InvalidInputError(f"{loss.value} needs targets shaped {output.shape}")
    if loss is Loss.MSE:
        diff = output - target
        return float(np.mean(diff ** 2)), 2.0 * diff / output.size
    clipped = np.clip(output, BCE_CLIP, 1.0 - BCE_CLIP)
    value = -np.mean(target * np.log(clipped) + (1.0 - target) * np.log(1.0 - clipped))
    return float(value), (clipped - target) / (clipped * (1.0 - clipped)) / output.size


def train_step(net: NeuralNet, optimizer, batch: np.ndarray, targets: Optional[np.ndarray],
               loss: Union[str, Loss] = Loss.MSE) -> float:
    """One forward/backward/update cycle; returns the loss before the update."""
    output = net.forward(batch, training=True)
    value, grad = loss_and_grad(loss, output, targets)
    if not np.isfinite(value):
        raise DivergenceError(f"{net.name}: non-finite loss {value}", net.name)
    net.backward(grad)
    optimizer.step(net.parameters(), net.gradients())
    return value


def gradient_check(
        net: NeuralNet,
        loss: Union[str, Loss],
        batch: np.ndarray,
        targets: Optional[np.ndarray] = None,
        h: float = 1e-5,
        training: bool = False,
) -> float:
    """Max relative error between back-propagated and central-difference gradients.

    Batch-norm running statistics are restored afterwards.
    """
    batch = np.asarray(batch, dtype=np.float64)
    saved = net.batchnorm_state()

    def evaluate() -> float:
        net.restore_batchnorm_state(saved)
        return loss_and_grad(loss, net.forward(batch, training), targets)[0]

    _, grad = loss_and_grad(loss, net.forward(batch, training), targets)
    net.backward(grad)
    analytic = [g.copy() for g in net.gradients()]

    worst = 0.0
    for param, expected in zip(net.parameters(), analytic):
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            plus = evaluate()
            param[index] = original - h
            minus = evaluate()
            param[index] = original
            numeric = (plus - minus) / (2 * h)
            scale = max(abs(expected[index]), abs(numeric), 1e-8)
            worst = max(worst, abs(expected[index] - numeric) / scale)
    net.restore_batchnorm_state(saved)
    logger.debug("%s gradient check: max relative error %.3g", net.name, worst)
    return worst


def count_params(net: NeuralNet) -> int:
    return net.count_params()
