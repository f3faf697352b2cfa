"""Probability models: a numpy softmax MLP, an inlier discriminator, and replayed
external probabilities.

Inputs are encoded as standardized numeric features followed by a one-hot block
per sensitive attribute; the encoder is fit on training rows only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .data import Dataset, InputError

PROB_FLOOR = 1e-12


class ProbabilityModel(Protocol):
    n_labels: int

    def predict_proba(self, data: Dataset) -> np.ndarray: ...


class OneClassModel(Protocol):
    def score(self, data: Dataset) -> np.ndarray: ...


@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: tuple[int, ...] = (64, 64, 64, 64)
    learning_rate: float = 1e-4
    epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if any(w < 1 for w in self.hidden_layers):
            raise InputError("hidden layer widths must be positive")
        if self.epochs < 0 or self.learning_rate <= 0:
            raise InputError("epochs must be >= 0 and learning_rate > 0")


@dataclass(frozen=True)
class Encoder:
    mean: np.ndarray
    scale: np.ndarray
    level_counts: tuple[int, ...]

    @classmethod
    def fit(cls, data: Dataset) -> "Encoder":
        feats = data.features
        mean = feats.mean(axis=0) if data.n else np.zeros(feats.shape[1])
        scale = feats.std(axis=0) if data.n else np.ones(feats.shape[1])
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale, data.spec.level_counts)

    def transform(self, data: Dataset) -> np.ndarray:
        blocks = [(data.features - self.mean) / self.scale]
        for k, m in enumerate(self.level_counts):
            onehot = np.zeros((data.n, m))
            onehot[np.arange(data.n), data.attributes[:, k]] = 1.0
            blocks.append(onehot)
        return np.hstack(blocks)


def init_params(sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """He-normal weights, zero biases, flattened as [W0, b0, W1, b1, ...]."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: list[np.ndarray], X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Return logits and the post-activation inputs of every layer."""
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for i in range(n_layers):
        z = h @ params[2 * i] + params[2 * i + 1]
        if i < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    return h, acts


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(params: list[np.ndarray], X: np.ndarray, Y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy of integer labels ``Y`` and its gradient."""
    n = X.shape[0]
    logits, acts = forward(params, X)
    probs = softmax(logits)
    loss = -np.mean(np.log(np.maximum(probs[np.arange(n), Y], PROB_FLOOR)))
    delta = probs
    delta[np.arange(n), Y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    n_layers = len(params) // 2
    for i in reversed(range(n_layers)):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params[2 * i].T) * (acts[i] > 0)
    return float(loss), grads


def train_adam(params, X, Y, cfg: MlpConfig) -> tuple[list[np.ndarray], list[float]]:
    params = [p.copy() for p in params]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    history = []
    for t in range(1, cfg.epochs + 1):
        loss, grads = loss_and_grad(params, X, Y)
        history.append(loss)
        c1 = 1 - cfg.beta1**t
        c2 = 1 - cfg.beta2**t
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= cfg.beta1
            mi += (1 - cfg.beta1) * g
            vi *= cfg.beta2
            vi += (1 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (mi / c1) / (np.sqrt(vi / c2) + cfg.eps)
    return params, history


@dataclass(frozen=True, eq=False)
class SoftmaxMLP:
    encoder: Encoder
    params: list[np.ndarray]
    n_labels: int
    loss_history: list[float] = field(default_factory=list)

    def predict_proba(self, data: Dataset) -> np.ndarray:
        logits, _ = forward(self.params, self.encoder.transform(data))
        return softmax(logits)


def fit_softmax_mlp(train: Dataset, cfg: MlpConfig = MlpConfig()) -> SoftmaxMLP:
    if train.labels is None:
        raise InputError("training data needs labels")
    if train.n_labels < 2:
        raise InputError("need at least two labels")
    if train.n == 0:
        raise InputError("training data is empty")
    encoder = Encoder.fit(train)
    X = encoder.transform(train)
    rng = np.random.default_rng(cfg.seed)
    params = init_params([X.shape[1], *cfg.hidden_layers, train.n_labels], rng)
    params, history = train_adam(params, X, train.labels, cfg)
    return SoftmaxMLP(encoder, params, train.n_labels, history)


@dataclass(frozen=True, eq=False)
class InlierClassifier:
    """Inlier-vs-outlier discriminator; ``score`` is the predicted inlier probability.

    A two-logit softmax is the same function as a sigmoid on the logit gap, so
    the softmax network is reused with labels {0: inlier, 1: outlier}.
    """

    net: SoftmaxMLP

    def score(self, data: Dataset) -> np.ndarray:
        return self.net.predict_proba(data)[:, 0]


ONECLASS_DEFAULT = MlpConfig(hidden_layers=(64, 64))


def fit_oneclass(train: Dataset, cfg: MlpConfig = ONECLASS_DEFAULT) -> InlierClassifier:
    if train.labels is None:
        raise InputError("training data needs inlier/outlier flags")
    flags = np.asarray(train.labels)
    if np.unique(flags).size < 2:
        raise InputError("training data must contain both inliers and outliers")
    binary = Dataset(train.features, train.attributes, train.spec, (flags != 0).astype(np.int64), 2, train.ids)
    return InlierClassifier(fit_softmax_mlp(binary, cfg))


@dataclass(frozen=True, eq=False)
class ExternalProbabilities:
    """Replays a fixed probability matrix, indexed by record id."""

    matrix: np.ndarray

    @property
    def n_labels(self) -> int:
        return self.matrix.shape[1]

    def predict_proba(self, data: Dataset) -> np.ndarray:
        return self.matrix[data.ids]


def external_scores(prob_matrix, tol: float = 1e-6) -> ExternalProbabilities:
    P = np.array(prob_matrix, dtype=float)
    if P.ndim != 2 or P.shape[1] < 1:
        raise InputError("probability matrix must be n x L")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        bad = int(np.flatnonzero(~(np.isfinite(P) & (P >= 0)).all(axis=1))[0])
        raise InputError(f"row {bad}: probabilities must be finite and non-negative")
    sums = P.sum(axis=1)
    off = np.flatnonzero(np.abs(sums - 1) > tol)
    if off.size:
        raise InputError(f"row {int(off[0])}: probabilities sum to {sums[off[0]]:.9g}, not 1")
    P /= sums[:, None]
    P.setflags(write=False)
    return ExternalProbabilities(P)
