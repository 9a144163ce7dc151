"""The stacked autoencoder: three individually trained autoencoders, stacked.

Each autoencoder is Dense+BatchNorm+ReLU on the way in. On the way out the
first one is Dense+Sigmoid and the deeper ones Dense+BatchNorm+Sigmoid. Codes
handed to the next autoencoder are min-max scaled to [0, 1]; the stacked model
folds that scaling into its dense layers.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np  # type: ignore
import pandas as pd  # type: ignore

from data_model import MinMaxScaling
from exceptions import DivergenceError, InvalidInputError
from neural.layers import BatchNorm, Dense, ReLU, Sigmoid
from neural.network import NeuralNet, train_step
from neural.optimizer import Adam
from neural.serialization import check_version, load_json, net_from_document, net_to_document, save_json, with_version

logger = logging.getLogger(__name__)

DEFAULT_INPUT_DIM = 1034
DEFAULT_DIMS = (512, 256, 128)


@dataclass
class CodeScaling:
    low: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, codes: np.ndarray) -> CodeScaling:
        low, high = codes.min(axis=0), codes.max(axis=0)
        span = high - low
        return cls(low, np.where(span > 0, span, 1.0))

    def transform(self, codes: np.ndarray) -> np.ndarray:
        return (codes - self.low) / self.span


class StackedAutoencoder:
    def __init__(self, input_dim: int, dims: Sequence[int], stages: list[tuple[NeuralNet, NeuralNet]],
                 scaling: Optional[MinMaxScaling] = None, *, encoder: Optional[NeuralNet] = None,
                 decoder: Optional[NeuralNet] = None):
        self.input_dim = input_dim
        self.dims = tuple(dims)
        self.stages = stages
        self.scaling = scaling
        self.code_scalings: list[Optional[CodeScaling]] = [None] * len(stages)
        if encoder is None or decoder is None:
            encoder, decoder = self._assemble()
        self.encoder, self.decoder = encoder, decoder

    @property
    def latent_dim(self) -> int:
        return self.dims[-1]

    def count_params(self) -> int:
        return self.encoder.count_params() + self.decoder.count_params()

    def _assemble(self) -> tuple[NeuralNet, NeuralNet]:
        encoder_layers, decoder_layers = [], []
        for index, (encoder, decoder) in enumerate(self.stages):
            encoder, decoder = encoder.copy(), decoder.copy()
            scaled_input = self.code_scalings[index - 1] if index > 0 else None
            if scaled_input is not None:
                dense = encoder.layers[0]
                dense.bias = dense.bias - (scaled_input.low / scaled_input.span) @ dense.weight
                dense.weight = dense.weight / scaled_input.span[:, None]
            scaled_code = self.code_scalings[index]
            if scaled_code is not None:
                # the next decoder hands back scaled codes
                dense = decoder.layers[0]
                dense.bias = dense.bias + scaled_code.low @ dense.weight
                dense.weight = scaled_code.span[:, None] * dense.weight
            encoder_layers.extend(encoder.layers)
            decoder_layers[:0] = decoder.layers
        return NeuralNet(encoder_layers, "encoder"), NeuralNet(decoder_layers, "decoder")

    def _check(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != self.input_dim:
            raise InvalidInputError(f"expected {self.input_dim} columns, got shape {data.shape}")
        return data

    def encode(self, data: np.ndarray) -> np.ndarray:
        return self.encoder.predict(self._check(data))

    def decode(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.float64)
        if codes.ndim != 2 or codes.shape[1] != self.latent_dim:
            raise InvalidInputError(f"expected {self.latent_dim} latent columns, got shape {codes.shape}")
        return self.decoder.predict(codes)

    def reconstruct(self, data: np.ndarray) -> np.ndarray:
        return self.decoder.predict(self.encode(data))

    def describe(self) -> list[str]:
        return self.encoder.describe() + self.decoder.describe()

    def to_document(self) -> dict:
        return with_version("stacked_autoencoder", {
            "input_dim": self.input_dim,
            "dims": list(self.dims),
            "encoder": net_to_document(self.encoder),
            "decoder": net_to_document(self.decoder),
            "scaling": self.scaling.to_dict() if self.scaling is not None else None,
        })

    def save_as(self, filename: str) -> None:
        save_json(filename, self.to_document())


def _autoencoder(in_dim: int, out_dim: int, first: bool, rng: np.random.Generator,
                 index: int) -> tuple[NeuralNet, NeuralNet]:
    encoder = NeuralNet([Dense(in_dim, out_dim, rng), BatchNorm(out_dim), ReLU()], f"ae{index}-encoder")
    decoder_layers = [Dense(out_dim, in_dim, rng)]
    if not first:
        decoder_layers.append(BatchNorm(in_dim))
    decoder_layers.append(Sigmoid())
    return encoder, NeuralNet(decoder_layers, f"ae{index}-decoder")


def build_sae(input_dim: int = DEFAULT_INPUT_DIM, dims: Sequence[int] = DEFAULT_DIMS, seed: int = 0) -> StackedAutoencoder:
    dims = tuple(int(d) for d in dims)
    if not dims or min(dims) < 1 or input_dim < 1:
        raise InvalidInputError(f"autoencoder dims must be positive, got {input_dim} -> {dims}")
    if any(a <= b for a, b in zip(dims, dims[1:])):
        raise InvalidInputError(f"autoencoder dims must be strictly decreasing, got {list(dims)}")
    rng = np.random.default_rng(seed)
    widths = (input_dim,) + dims
    stages = [_autoencoder(a, b, i == 0, rng, i + 1) for i, (a, b) in enumerate(zip(widths, widths[1:]))]
    return StackedAutoencoder(input_dim, dims, stages)


def _fit(net: NeuralNet, data: np.ndarray, epochs: int, batch_size: int, rng: np.random.Generator,
         learning_rate: float, patience: int, delta: float) -> list[float]:
    optimizer = Adam(learning_rate)
    history: list[float] = []
    best, best_epoch = np.inf, 0
    for epoch in range(epochs):
        order = rng.permutation(len(data))
        total, seen = 0.0, 0
        for start in range(0, len(data), batch_size):
            rows = order[start:start + batch_size]
            if len(rows) < 2:
                continue
            batch = data[rows]
            total += train_step(net, optimizer, batch, batch) * len(rows)
            seen += len(rows)
        history.append(total / seen)
        if history[-1] < best - delta:
            best, best_epoch = history[-1], epoch
        elif epoch - best_epoch >= patience:
            logger.debug("%s: early stop after %d epochs", net.name, epoch + 1)
            break
    return history


def train_greedy(
        model: StackedAutoencoder,
        data: np.ndarray,
        epochs: int = 100,
        batch_size: int = 64,
        seed: int = 0,
        *,
        learning_rate: float = 1e-3,
        patience: int = 10,
        delta: float = 1e-6,
        fine_tune_epochs: int = 0,
) -> tuple[StackedAutoencoder, list[list[float]]]:
    """Train each autoencoder on the (scaled) codes of the previous one.

    Returns the model, trained in place, and one loss history per autoencoder.
    """
    data = model._check(data)
    if epochs < 0 or batch_size < 2:
        raise InvalidInputError(f"epochs must be >= 0 and batch_size >= 2, got {epochs}, {batch_size}")
    if len(data) < batch_size:
        raise InvalidInputError(f"{len(data)} rows is fewer than the batch size {batch_size}")
    if data.min() < 0.0 or data.max() > 1.0:
        raise InvalidInputError("autoencoder input must be scaled to [0, 1]")
    histories: list[list[float]] = [[] for _ in model.stages]
    if epochs == 0:
        return model, histories

    rng = np.random.default_rng(seed)
    inputs = data
    for index, (encoder, decoder) in enumerate(model.stages):
        net = NeuralNet(encoder.layers + decoder.layers, f"ae{index + 1}")
        try:
            histories[index] = _fit(net, inputs, epochs, batch_size, rng, learning_rate, patience, delta)
        except DivergenceError as exc:
            raise DivergenceError(f"autoencoder {index + 1} diverged: {exc}", index + 1)
        logger.info("ae%d: %d epochs, loss %.3g -> %.3g", index + 1, len(histories[index]), histories[index][0],
                    histories[index][-1])
        if index + 1 < len(model.stages):
            codes = encoder.predict(inputs)
            model.code_scalings[index] = CodeScaling.fit(codes)
            inputs = model.code_scalings[index].transform(codes)

    model.encoder, model.decoder = model._assemble()
    if fine_tune_epochs > 0:
        net = NeuralNet(model.encoder.layers + model.decoder.layers, "stacked")
        tuned = _fit(net, data, fine_tune_epochs, batch_size, rng, learning_rate, patience, delta)
        logger.info("fine-tuning: %d epochs, loss %.3g -> %.3g", len(tuned), tuned[0], tuned[-1])
    return model, histories


def encode(model: StackedAutoencoder, data: np.ndarray) -> np.ndarray:
    return model.encode(data)


def retained_variance(data: np.ndarray, reconstruction: np.ndarray) -> float:
    """1 - SSE / SST, with SST taken about the column means."""
    sse = float(np.sum((data - reconstruction) ** 2))
    sst = float(np.sum((data - data.mean(axis=0)) ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else 0.0
    return 1.0 - sse / sst


def reconstruction_error(model: StackedAutoencoder, data: np.ndarray) -> tuple[np.ndarray, float]:
    data = model._check(data)
    reconstruction = model.reconstruct(data)
    per_row = np.mean((data - reconstruction) ** 2, axis=1)
    return per_row, retained_variance(data, reconstruction)


def write_histories(histories: list[list[float]], directory: str) -> list[str]:
    """One `ae<k>_loss.csv` (epoch,loss) per autoencoder."""
    paths = []
    for index, history in enumerate(histories, start=1):
        path = os.path.join(directory, f"ae{index}_loss.csv")
        frame = pd.DataFrame({"epoch": np.arange(1, len(history) + 1), "loss": history})
        frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
        paths.append(path)
    return paths


def sae_from_document(document: dict) -> StackedAutoencoder:
    document = check_version(document, "stacked_autoencoder")
    scaling = document.get("scaling")
    return StackedAutoencoder(
        int(document["input_dim"]), document["dims"], [],
        MinMaxScaling.from_dict(scaling) if scaling is not None else None,
        encoder=net_from_document(document["encoder"]),
        decoder=net_from_document(document["decoder"]),
    )


def load_sae(filename: str) -> StackedAutoencoder:
    return sae_from_document(load_json(filename))
