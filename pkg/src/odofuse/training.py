"""Adam training loop and streaming inference for the speed regressor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .net import SpeedNet, loss_and_gradients

WINDOW_LEN = 50


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 1024
    epochs: int = 1000
    validation_fraction: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation fraction must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)


class Adam:
    """Standard Adam with bias correction, one slot per parameter tensor."""

    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for _, p in params]
        self.v = [np.zeros_like(p) for _, p in params]
        self.t = 0

    def step(self, params, grads) -> None:
        cfg = self.cfg
        self.t += 1
        corr1 = 1.0 - cfg.beta1**self.t
        corr2 = 1.0 - cfg.beta2**self.t
        for (_, p), g, m, v in zip(params, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + cfg.epsilon)


def split_dataset(n_samples: int, cfg: TrainConfig):
    """Seeded shuffle, then an exact train/validation index split."""
    rng = np.random.default_rng([cfg.shuffle_seed, 13])
    order = rng.permutation(n_samples)
    n_val = int(round(n_samples * cfg.validation_fraction))
    n_val = min(max(n_val, 1), n_samples - 1)
    return order[: n_samples - n_val], order[n_samples - n_val :]


def evaluate_loss(model: SpeedNet, windows, labels, batch_size: int = 4096) -> float:
    scale = model.architecture.scale
    total = 0.0
    for start in range(0, windows.shape[0], batch_size):
        chunk = windows[start : start + batch_size]
        out = model.forward(chunk, train=False)
        total += float(np.sum((out - scale * labels[start : start + batch_size]) ** 2))
    return total / windows.shape[0]


def train(model: SpeedNet, windows, labels, cfg: TrainConfig) -> TrainHistory:
    """Train in place; returns per-epoch train/validation loss history.

    ``windows`` is (N, 50, 6), ``labels`` the wheel speed in m/s at each
    window's end. Negative labels are clamped to zero (the regressor cannot
    represent reverse driving). Dropout is active for training batches and
    off for validation.
    """
    windows = np.asarray(windows, dtype=float)
    labels = np.maximum(np.asarray(labels, dtype=float), 0.0)
    if windows.shape[0] == 0:
        raise ValueError("empty training dataset")
    if windows.shape[0] != labels.shape[0]:
        raise ValueError("windows/labels length mismatch")

    train_idx, val_idx = split_dataset(windows.shape[0], cfg)
    x_train, y_train = windows[train_idx], labels[train_idx]
    x_val, y_val = windows[val_idx], labels[val_idx]

    params = model.parameters()
    optimizer = Adam(params, cfg)
    epoch_rng = np.random.default_rng([cfg.shuffle_seed, 17])
    dropout_rng = np.random.default_rng([cfg.shuffle_seed, 19])

    history = TrainHistory()
    for _ in range(cfg.epochs):
        order = epoch_rng.permutation(x_train.shape[0])
        batch_losses = []
        for start in range(0, order.shape[0], cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            value, grads = loss_and_gradients(
                model, x_train[batch], y_train[batch], train_mode=True, rng=dropout_rng
            )
            optimizer.step(params, grads)
            batch_losses.append(value)
        history.train_loss.append(float(np.mean(batch_losses)))
        history.val_loss.append(evaluate_loss(model, x_val, y_val))
    return history


def predict_stream(model: SpeedNet, samples, batch_size: int = 2048) -> np.ndarray:
    """Raw regressed speed for every 50-sample window, stride 1.

    ``samples`` is the (N, 6) v-frame IMU stream; the output has N - 49
    entries, each timestamped at its window's last sample.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != model.architecture.input_depth:
        raise ValueError("samples must be (N, input_depth)")
    if samples.shape[0] < WINDOW_LEN:
        raise ValueError(f"need at least {WINDOW_LEN} samples")
    windows = sliding_window_view(samples, WINDOW_LEN, axis=0)  # (N-49, 6, 50)
    windows = windows.transpose(0, 2, 1)
    scale = model.architecture.scale
    out = np.empty(windows.shape[0])
    for start in range(0, windows.shape[0], batch_size):
        chunk = np.ascontiguousarray(windows[start : start + batch_size])
        out[start : start + chunk.shape[0]] = model.forward(chunk, train=False) / scale
    return out
