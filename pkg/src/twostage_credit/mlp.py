"""Minimal feed-forward network: 10 inputs, 2 logistic hidden units, linear output.

Implemented from scratch in numpy with exact analytic gradients and an
Adam training loop. The network outputs the logit f(x); the probability
of default is sigmoid(f(x)).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .ingest import N_FEATURES

N_HIDDEN = 2

PROB_CLIP = 1e-12  # keeps cross-entropy finite without biasing gradients


class TrainingDiverged(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class MLPParams:
    """Weights of the 10 -> 2 -> 1 network. Treated as an immutable snapshot."""

    W1: np.ndarray  # (2, 10)
    b1: np.ndarray  # (2,)
    w2: np.ndarray  # (2,)
    b2: float

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64).reshape(N_HIDDEN, N_FEATURES)
        self.b1 = np.asarray(self.b1, dtype=np.float64).reshape(N_HIDDEN)
        self.w2 = np.asarray(self.w2, dtype=np.float64).reshape(N_HIDDEN)
        self.b2 = float(self.b2)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def from_flat(cls, v: np.ndarray) -> "MLPParams":
        v = np.asarray(v, dtype=np.float64)
        k = N_HIDDEN * N_FEATURES
        return cls(
            W1=v[:k].reshape(N_HIDDEN, N_FEATURES),
            b1=v[k : k + N_HIDDEN],
            w2=v[k + N_HIDDEN : k + 2 * N_HIDDEN],
            b2=v[k + 2 * N_HIDDEN],
        )


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-2
    optimizer: str = "adam"
    init_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")


def init_params(seed: int, init_scale: float = 0.5) -> MLPParams:
    """All entries i.i.d. uniform on [-init_scale, +init_scale]."""
    rng = np.random.default_rng(seed)
    n = N_HIDDEN * N_FEATURES + 2 * N_HIDDEN + 1
    return MLPParams.from_flat(rng.uniform(-init_scale, init_scale, size=n))


def forward(params: MLPParams, x: np.ndarray) -> np.ndarray | float:
    """Logit f(x) = w2 . sigmoid(W1 x + b1) + b2 for one point or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x.reshape(-1, N_FEATURES)
    h = expit(X @ params.W1.T + params.b1)
    f = h @ params.w2 + params.b2
    return float(f[0]) if single else f


def predict_proba(params: MLPParams, x: np.ndarray) -> np.ndarray | float:
    """Probability of default sigmoid(f(x)); stable for large |f|."""
    f = forward(params, x)
    return float(expit(f)) if np.isscalar(f) else expit(f)


def loss_and_gradient(params: MLPParams, X: np.ndarray, y: np.ndarray) -> tuple[float, MLPParams]:
    """Mean binary cross-entropy over the batch and its exact gradient.

    Probabilities are clipped to [1e-12, 1 - 1e-12] before the log.
    The gradient is returned in the MLPParams layout.
    """
    X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = len(y)
    if n == 0:
        raise ValueError("empty batch")

    h = expit(X @ params.W1.T + params.b1)  # (n, 2)
    f = h @ params.w2 + params.b2  # (n,)
    p = expit(f)
    p_clip = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    loss = float(-np.mean(y * np.log(p_clip) + (1.0 - y) * np.log(1.0 - p_clip)))

    delta = (p - y) / n  # dL/df
    gw2 = h.T @ delta
    gb2 = float(delta.sum())
    dh = np.outer(delta, params.w2)
    dz1 = dh * h * (1.0 - h)
    gW1 = dz1.T @ X
    gb1 = dz1.sum(axis=0)
    return loss, MLPParams(W1=gW1, b1=gb1, w2=gw2, b2=gb2)


@dataclass
class _AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return theta - lr * mhat / (np.sqrt(vhat) + self.eps)


def train(config: TrainConfig, X: np.ndarray, y: np.ndarray) -> MLPParams:
    """Mini-batch training; deterministic given (config, data).

    One seed stream drives both the initialization and the per-epoch
    reshuffles. Raises TrainingDiverged if the loss goes non-finite.
    """
    X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    if config.optimizer != "adam":
        raise ValueError(f"unknown optimizer: {config.optimizer}")

    rng = np.random.default_rng(config.seed)
    n_params = N_HIDDEN * N_FEATURES + 2 * N_HIDDEN + 1
    theta = rng.uniform(-config.init_scale, config.init_scale, size=n_params)
    adam = _AdamState(m=np.zeros(n_params), v=np.zeros(n_params))

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            params = MLPParams.from_flat(theta)
            loss, grad = loss_and_gradient(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, offset {start}")
            theta = adam.step(theta, grad.flat(), config.learning_rate)
    return MLPParams.from_flat(theta)


def epoch_mean_losses(config: TrainConfig, X: np.ndarray, y: np.ndarray) -> list[float]:
    """Per-epoch mean mini-batch loss for the same run train() performs."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = len(y)
    rng = np.random.default_rng(config.seed)
    n_params = N_HIDDEN * N_FEATURES + 2 * N_HIDDEN + 1
    theta = rng.uniform(-config.init_scale, config.init_scale, size=n_params)
    adam = _AdamState(m=np.zeros(n_params), v=np.zeros(n_params))
    means = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grad = loss_and_gradient(MLPParams.from_flat(theta), X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged("non-finite loss")
            losses.append(loss)
            theta = adam.step(theta, grad.flat(), config.learning_rate)
        means.append(float(np.mean(losses)))
    return means
