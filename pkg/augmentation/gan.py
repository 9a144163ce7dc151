"""Label-conditioned WGAN-GP on mode-normalized rows, with optional PacGAN packing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np  # type: ignore

from augmentation.modes import ColumnModes, MsnEncoded, encoded_width, fit_modes, msn_decode, msn_encode
from config import AugmentationConfig
from exceptions import DivergenceError, InvalidInputError
from neural.layers import BatchNorm, Dense, ReLU, Sigmoid
from neural.network import NeuralNet
from neural.optimizer import Adam
from neural.serialization import check_version, load_json, net_from_document, net_to_document, save_json, with_version

logger = logging.getLogger(__name__)

N_CLASSES = 2
NORM_FLOOR = 1e-12


@dataclass
class GanModel:
    generator: NeuralNet
    critic: NeuralNet
    modes: list[ColumnModes]
    noise_dim: int
    pac: int = 1
    gp_weight: float = 10.0
    history: dict[str, list[float]] = field(default_factory=lambda: {"critic": [], "generator": []})

    @property
    def width(self) -> int:
        return encoded_width(self.modes)

    def generate(self, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Encoded rows for the given labels, generator in inference mode."""
        noise = rng.standard_normal((len(labels), self.noise_dim))
        return self.generator.predict(np.hstack([noise, one_hot(labels)]))

    def to_document(self) -> dict:
        return with_version("gan", {
            "noise_dim": self.noise_dim,
            "pac": self.pac,
            "gp_weight": self.gp_weight,
            "modes": [m.to_dict() for m in self.modes],
            "generator": net_to_document(self.generator),
            "critic": net_to_document(self.critic),
            "history": self.history,
        })

    def save_as(self, filename: str) -> None:
        save_json(filename, self.to_document())


def one_hot(labels: np.ndarray) -> np.ndarray:
    return np.eye(N_CLASSES)[np.asarray(labels, dtype=np.int64)]


def pack(rows: np.ndarray, pac: int) -> np.ndarray:
    """Concatenate each run of `pac` consecutive rows into one critic input."""
    if len(rows) % pac:
        raise InvalidInputError(f"{len(rows)} rows cannot be packed in groups of {pac}")
    return rows.reshape(len(rows) // pac, pac * rows.shape[1])


def build_gan(modes: Sequence[ColumnModes], noise_dim: int = 128, hidden_dim: int = 256, pac: int = 1,
              gp_weight: float = 10.0, seed: int = 0) -> GanModel:
    rng = np.random.default_rng(seed)
    width = encoded_width(modes)
    generator = NeuralNet([
        Dense(noise_dim + N_CLASSES, hidden_dim, rng), BatchNorm(hidden_dim), ReLU(),
        Dense(hidden_dim, hidden_dim, rng), BatchNorm(hidden_dim), ReLU(),
        Dense(hidden_dim, width, rng), Sigmoid(),
    ], "generator")
    critic = NeuralNet([
        Dense(pac * (width + N_CLASSES), hidden_dim, rng), ReLU(),
        Dense(hidden_dim, hidden_dim, rng), ReLU(),
        Dense(hidden_dim, 1, rng),
    ], "critic")
    return GanModel(generator, critic, list(modes), noise_dim, pac, gp_weight)


def gradient_penalty(critic: NeuralNet, points: np.ndarray, weight: float) -> tuple[float, list[np.ndarray]]:
    """weight * mean((|grad critic(points)| - 1)^2) and its parameter gradients."""
    grad, signals = critic.input_gradient(points)
    norms = np.linalg.norm(grad, axis=1, keepdims=True)
    value = weight * float(np.mean((norms - 1.0) ** 2))
    upstream = weight * 2.0 * (norms - 1.0) / len(points) * grad / np.maximum(norms, NORM_FLOOR)
    return value, critic.penalty_gradients(upstream, signals)


def _scored_gradients(critic: NeuralNet, packed: np.ndarray, sign: float) -> tuple[float, list[np.ndarray]]:
    """sign * mean(critic(packed)) and its parameter gradients."""
    scores = critic.forward(packed, training=True)
    critic.backward(np.full(scores.shape, sign / len(scores)))
    return sign * float(scores.mean()), [g.copy() for g in critic.gradients()]


def critic_step(model: GanModel, optimizer: Adam, real: np.ndarray, labels: np.ndarray,
                rng: np.random.Generator) -> float:
    conditioned = one_hot(labels)
    noise = rng.standard_normal((len(real), model.noise_dim))
    # batch statistics for the fakes, but running statistics move only on generator steps
    state = model.generator.batchnorm_state()
    fake = model.generator.forward(np.hstack([noise, conditioned]), training=True)
    model.generator.restore_batchnorm_state(state)
    real_packed = pack(np.hstack([real, conditioned]), model.pac)
    fake_packed = pack(np.hstack([fake, conditioned]), model.pac)
    mix = rng.random((len(real_packed), 1))
    interpolates = mix * real_packed + (1.0 - mix) * fake_packed

    fake_score, fake_grads = _scored_gradients(model.critic, fake_packed, 1.0)
    real_score, real_grads = _scored_gradients(model.critic, real_packed, -1.0)
    penalty, penalty_grads = gradient_penalty(model.critic, interpolates, model.gp_weight)
    loss = fake_score + real_score + penalty
    if not np.isfinite(loss):
        raise DivergenceError(f"critic loss is {loss}", "critic")
    grads = [a + b + c for a, b, c in zip(fake_grads, real_grads, penalty_grads)]
    optimizer.step(model.critic.parameters(), grads)
    return loss


def generator_step(model: GanModel, optimizer: Adam, labels: np.ndarray, rng: np.random.Generator) -> float:
    conditioned = one_hot(labels)
    noise = rng.standard_normal((len(labels), model.noise_dim))
    fake = model.generator.forward(np.hstack([noise, conditioned]), training=True)
    scores = model.critic.forward(pack(np.hstack([fake, conditioned]), model.pac), training=False)
    loss = -float(scores.mean())
    if not np.isfinite(loss):
        raise DivergenceError(f"generator loss is {loss}", "generator")
    packed_grad = model.critic.backward(np.full(scores.shape, -1.0 / len(scores)))
    row_grad = packed_grad.reshape(len(fake), -1)[:, :model.width]
    model.generator.backward(row_grad)
    optimizer.step(model.generator.parameters(), model.generator.gradients())
    return loss


def train_wgan_gp(
        real: np.ndarray,
        labels: np.ndarray,
        modes: Sequence[ColumnModes],
        config: Optional[AugmentationConfig] = None,
        seed: int = 0,
) -> GanModel:
    """Alternate `critic_steps` critic updates with one generator update.

    An epoch is len(real) // batch_size generator updates. Losses are
    recorded once per generator update.
    """
    config = config or AugmentationConfig()
    real = np.asarray(real, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if real.ndim != 2 or real.shape[1] != encoded_width(modes):
        raise InvalidInputError(f"expected {encoded_width(modes)} encoded columns, got shape {real.shape}")
    if len(labels) != len(real) or (len(labels) and not np.isin(labels, (0, 1)).all()):
        raise InvalidInputError("one 0/1 label per encoded row is required")
    if config.batch_size % config.pac:
        raise InvalidInputError(f"batch size {config.batch_size} is not divisible by pac {config.pac}")
    if config.batch_size < 2 or len(real) < config.batch_size:
        raise InvalidInputError(f"{len(real)} rows cannot fill a batch of {config.batch_size}")

    model = build_gan(modes, config.noise_dim, config.hidden_dim, config.pac, config.gp_weight, seed)
    rng = np.random.default_rng(seed)
    critic_optimizer = Adam(config.learning_rate, config.beta1, config.beta2)
    generator_optimizer = Adam(config.learning_rate, config.beta1, config.beta2)
    steps = len(real) // config.batch_size
    for epoch in range(config.epochs):
        order = rng.permutation(len(real))
        for step in range(steps):
            for _ in range(config.critic_steps):
                rows = rng.choice(len(real), config.batch_size, replace=False)
                critic_loss = critic_step(model, critic_optimizer, real[rows], labels[rows], rng)
            batch = order[step * config.batch_size:(step + 1) * config.batch_size]
            generator_loss = generator_step(model, generator_optimizer, labels[batch], rng)
            model.history["critic"].append(critic_loss)
            model.history["generator"].append(generator_loss)
        if (epoch + 1) % 50 == 0:
            logger.info("gan epoch %d: critic %.4g, generator %.4g", epoch + 1, model.history["critic"][-1],
                        model.history["generator"][-1])
    return model


def class_counts(n_total: int, ratio: Sequence[int] = (2, 1)) -> tuple[int, int]:
    """(genuine, theft); the theft count is floored and the remainder goes to genuine."""
    genuine_share, theft_share = ratio
    if n_total < 0 or min(ratio) < 0 or genuine_share + theft_share <= 0:
        raise InvalidInputError(f"cannot split {n_total} rows in the ratio {tuple(ratio)}")
    theft = n_total * theft_share // (genuine_share + theft_share)
    return n_total - theft, theft


def sample_synthetic(
        model: GanModel,
        n_total: int,
        ratio: Sequence[int] = (2, 1),
        seed: int = 0,
        modes: Optional[Sequence[ColumnModes]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """`n_total` decoded rows, genuine rows first."""
    modes = model.modes if modes is None else list(modes)
    genuine, theft = class_counts(n_total, ratio)
    labels = np.concatenate([np.zeros(genuine, dtype=np.int64), np.ones(theft, dtype=np.int64)])
    if n_total == 0:
        return np.empty((0, len(modes))), labels
    rng = np.random.default_rng(seed)
    encoded = MsnEncoded.from_matrix(model.generate(labels, rng), modes)
    return msn_decode(encoded, modes), labels


def augment(features: np.ndarray, labels: np.ndarray, config: Optional[AugmentationConfig] = None,
            seed: int = 0) -> tuple[np.ndarray, np.ndarray, GanModel]:
    """Fit modes, train the GAN and sample `config.n_samples` labelled rows."""
    config = config or AugmentationConfig()
    modes = fit_modes(features, config.max_modes, seed)
    encoded = msn_encode(features, modes, seed).to_matrix(modes)
    model = train_wgan_gp(encoded, labels, modes, config, seed)
    synthetic, synthetic_labels = sample_synthetic(model, config.n_samples, config.ratio, seed)
    return synthetic, synthetic_labels, model


def gan_from_document(document: dict) -> GanModel:
    document = check_version(document, "gan")
    return GanModel(
        net_from_document(document["generator"]),
        net_from_document(document["critic"]),
        [ColumnModes.from_dict(m) for m in document["modes"]],
        int(document["noise_dim"]),
        int(document["pac"]),
        float(document["gp_weight"]),
        {k: list(v) for k, v in document.get("history", {}).items()},
    )


def load_gan(filename: str) -> GanModel:
    return gan_from_document(load_json(filename))
