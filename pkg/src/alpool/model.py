"""Small probabilistic classifiers: softmax-linear and one-hidden-layer MLP.

Everything is deterministic given the config seeds: initialization draws
from a seeded generator in a documented order, and training shuffles
mini-batches with its own seeded generator. Classifiers are immutable;
``train``/``fine_tune`` return new instances. The MLP hidden layer uses
tanh (smooth, so analytic gradients can be finite-difference checked).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ModelError

LINEAR = "linear"
MLP = "mlp"

FINE_TUNE = "fine_tune"
FREEZE = "freeze"

_ARCH_TAGS = {LINEAR: 0, MLP: 1}
_TAG_ARCHS = {v: k for k, v in _ARCH_TAGS.items()}


@dataclass(frozen=True)
class ModelConfig:
    feature_count: int
    class_count: int
    architecture: str = LINEAR
    hidden_units: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in (LINEAR, MLP):
            raise ModelError("INVALID_CONFIG", f"unknown architecture {self.architecture!r}")
        if self.class_count < 2:
            raise ModelError("INVALID_CONFIG", f"class_count {self.class_count} must be >= 2")
        if self.feature_count < 1:
            raise ModelError("INVALID_CONFIG", f"feature_count {self.feature_count} must be >= 1")
        if self.architecture == MLP and self.hidden_units < 1:
            raise ModelError("INVALID_CONFIG", "MLP needs hidden_units >= 1")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    epochs: int = 30
    batch_size: int = 8
    mode: str = FINE_TUNE
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ModelError("INVALID_CONFIG", f"learning_rate {self.learning_rate} must be > 0")
        if self.epochs < 0:
            raise ModelError("INVALID_CONFIG", f"epochs {self.epochs} must be >= 0")
        if self.batch_size < 1:
            raise ModelError("INVALID_CONFIG", f"batch_size {self.batch_size} must be >= 1")
        if self.mode not in (FINE_TUNE, FREEZE):
            raise ModelError("INVALID_CONFIG", f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Classifier:
    config: ModelConfig
    weights: tuple[np.ndarray, ...]  # linear: (W, b); mlp: (W1, b1, W2, b2)

    def __post_init__(self):
        expected = _shapes(self.config)
        got = tuple(w.shape for w in self.weights)
        if got != expected:
            raise ModelError("SHAPE_MISMATCH", f"weight shapes {got} do not match config {expected}")
        for w in self.weights:
            if not np.all(np.isfinite(w)):
                raise ModelError("NON_FINITE_WEIGHT", "classifier weights are not finite")
            w.flags.writeable = False


def _shapes(cfg: ModelConfig) -> tuple[tuple[int, ...], ...]:
    d, c, h = cfg.feature_count, cfg.class_count, cfg.hidden_units
    if cfg.architecture == LINEAR:
        return ((c, d), (c,))
    return ((h, d), (h,), (c, h), (c,))


def init(config: ModelConfig) -> Classifier:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    rng = np.random.default_rng(config.seed)
    weights = []
    for shape in _shapes(config):
        fan_in = shape[-1] if len(shape) > 1 else weights[-1].shape[-1]
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=shape))
    return Classifier(config=config, weights=tuple(weights))


def _check_features(model: Classifier, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.config.feature_count:
        raise ModelError(
            "SHAPE_MISMATCH",
            f"features {x.shape} do not match feature_count {model.config.feature_count}",
        )
    return x


def _forward_raw(
    cfg: ModelConfig, weights: Sequence[np.ndarray], x: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    """Returns (logits, hidden_activation) with hidden=None for linear models."""
    if cfg.architecture == LINEAR:
        w, b = weights
        return x @ w.T + b, None
    w1, b1, w2, b2 = weights
    hidden = np.tanh(x @ w1.T + b1)
    return hidden @ w2.T + b2, hidden


def _forward(model: Classifier, x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    return _forward_raw(model.config, model.weights, x)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(model: Classifier, samples) -> np.ndarray:
    """Softmax class distributions, one row per sample, rows summing to 1."""
    x = _check_features(model, samples)
    logits, _ = _forward(model, x)
    return _softmax(logits)


def predict(model: Classifier, samples) -> np.ndarray:
    return np.argmax(predict_proba(model, samples), axis=1)


def cross_entropy(model: Classifier, samples, labels) -> float:
    """Mean negative log-likelihood, computed via log-sum-exp."""
    x = _check_features(model, samples)
    y = _check_labels(model, x, labels)
    logits, _ = _forward(model, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float((lse - shifted[np.arange(x.shape[0]), y]).mean())


def _check_labels(model: Classifier, x: np.ndarray, labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ModelError("SHAPE_MISMATCH", f"labels {y.shape} do not match {x.shape[0]} samples")
    if np.any(y < 0):
        raise ModelError("UNLABELED_SAMPLE", "training labels contain UNKNOWN entries")
    if np.any(y >= model.config.class_count):
        raise ModelError(
            "INVALID_LABEL", f"label {int(y.max())} >= class_count {model.config.class_count}"
        )
    return y


def _gradients_raw(
    cfg: ModelConfig, weights: Sequence[np.ndarray], x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, ...]:
    n = x.shape[0]
    logits, hidden = _forward_raw(cfg, weights, x)
    delta = _softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    if cfg.architecture == LINEAR:
        return delta.T @ x, delta.sum(axis=0)
    w2 = weights[2]
    g_w2 = delta.T @ hidden
    g_b2 = delta.sum(axis=0)
    d_hidden = (delta @ w2) * (1.0 - hidden * hidden)
    g_w1 = d_hidden.T @ x
    g_b1 = d_hidden.sum(axis=0)
    return g_w1, g_b1, g_w2, g_b2


def gradients(model: Classifier, samples, labels) -> tuple[np.ndarray, ...]:
    """Analytic mean cross-entropy gradients, one array per weight tensor."""
    x = _check_features(model, samples)
    y = _check_labels(model, x, labels)
    return _gradients_raw(model.config, model.weights, x, y)


def _trainable_mask(model: Classifier, mode: str) -> tuple[bool, ...]:
    # FREEZE keeps every layer but the output layer fixed; a linear model's
    # only layer is its output layer, so freezing degenerates to fine-tuning.
    if mode == FINE_TUNE or model.config.architecture == LINEAR:
        return tuple(True for _ in model.weights)
    return (False, False, True, True)


def train(model: Classifier, samples, labels, cfg: TrainConfig) -> Classifier:
    """Seeded shuffled mini-batch SGD on mean cross-entropy.

    Returns a new classifier; ``epochs=0`` returns the input unchanged.
    Raises NON_FINITE_LOSS if the weights diverge.
    """
    x = _check_features(model, samples)
    y = _check_labels(model, x, labels)
    if x.shape[0] == 0:
        raise ModelError("SHAPE_MISMATCH", "training set is empty")
    if cfg.epochs == 0:
        return model
    rng = np.random.default_rng(cfg.seed)
    weights = [w.copy() for w in model.weights]
    trainable = _trainable_mask(model, cfg.mode)
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            grads = _gradients_raw(model.config, weights, x[batch], y[batch])
            for w, g, free in zip(weights, grads, trainable):
                if free:
                    w -= cfg.learning_rate * g
        if not all(np.all(np.isfinite(w)) for w in weights):
            raise ModelError("NON_FINITE_LOSS", "training diverged to non-finite weights")
    return Classifier(config=model.config, weights=tuple(weights))


def fine_tune(base: Classifier, samples, labels, cfg: TrainConfig) -> Classifier:
    """Warm-start training from an existing model's weights (base unchanged)."""
    return train(base, samples, labels, cfg)


_HEADER = struct.Struct("<BIII")  # arch tag, feature_count, class_count, hidden_units


def save_weights(model: Classifier, path) -> None:
    """Flat binary: header (arch tag, d, C, h) then float64 little-endian
    in layer order W1, b1[, W2, b2], each row-major."""
    cfg = model.config
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_ARCH_TAGS[cfg.architecture], cfg.feature_count,
                              cfg.class_count, cfg.hidden_units))
        for w in model.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_weights(path, seed: int = 0) -> Classifier:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ModelError("TRUNCATED_FILE", f"{path} is too short for a weights header", file=str(path))
        tag, d, c, h = _HEADER.unpack(header)
        if tag not in _TAG_ARCHS:
            raise ModelError("BAD_MAGIC", f"{path} has unknown architecture tag {tag}", file=str(path))
        cfg = ModelConfig(feature_count=d, class_count=c, architecture=_TAG_ARCHS[tag],
                          hidden_units=h, seed=seed)
        weights = []
        for shape in _shapes(cfg):
            count = int(np.prod(shape))
            raw = fh.read(8 * count)
            if len(raw) < 8 * count:
                raise ModelError("TRUNCATED_FILE", f"{path} ends inside a weight tensor", file=str(path))
            weights.append(np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape))
        if fh.read(1):
            raise ModelError("BAD_MAGIC", f"{path} has trailing bytes after the last tensor", file=str(path))
    return Classifier(config=cfg, weights=tuple(weights))


def with_seed(cfg: TrainConfig, seed: int, learning_rate: float | None = None) -> TrainConfig:
    """Derived copy used by the engine to stamp per-member seeds and rates."""
    if learning_rate is None:
        return replace(cfg, seed=seed)
    return replace(cfg, seed=seed, learning_rate=learning_rate)
