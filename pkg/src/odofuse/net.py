"""1D CNN speed regressor: forward inference and analytic backpropagation.

The network maps a one-second window of v-frame IMU samples, shape (50, 6)
with columns [wx, wy, wz, fx, fy, fz], to a scaled forward speed. The final
ReLU keeps the output non-negative; dividing by the scale factor yields the
speed in m/s. Layer sizes are architecture-config fields, everything runs in
float64, and gradients are checked against central finite differences in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_SCALE = 1.0 / 30.0


# -- architecture descriptors -------------------------------------------------


@dataclass(frozen=True)
class Conv1d:
    depth: int
    kernel: int


@dataclass(frozen=True)
class MaxPool:
    size: int


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Dropout:
    prob: float


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Architecture:
    """Ordered layer descriptors plus the output scale factor."""

    input_len: int = 50
    input_depth: int = 6
    layers: tuple = ()
    scale: float = DEFAULT_SCALE


def default_architecture(
    conv_depths=(16, 32, 64, 128),
    kernel: int = 5,
    pool: int = 2,
    dense_units=(256, 64),
    dropout: float = 0.5,
    input_len: int = 50,
    input_depth: int = 6,
    scale: float = DEFAULT_SCALE,
) -> Architecture:
    """Conv/pool stack, then dropout-fronted dense layers, final ReLU output."""
    layers: list = []
    for depth in conv_depths:
        layers += [Conv1d(depth, kernel), Relu(), MaxPool(pool)]
    layers.append(Flatten())
    for i, units in enumerate(dense_units):
        if i < 2:
            layers.append(Dropout(dropout))
        layers += [Dense(units), Relu()]
    layers += [Dense(1), Relu()]
    return Architecture(input_len, input_depth, tuple(layers), scale)


def reduced_architecture(scale: float = DEFAULT_SCALE) -> Architecture:
    """Small stack (conv 4/8, dense 16->1) used by the gradient-check suite."""
    return default_architecture(
        conv_depths=(4, 8), dense_units=(16,), dropout=0.5, scale=scale
    )


# -- runtime layers ------------------------------------------------------------


class _ConvLayer:
    def __init__(self, depth: int, kernel: int, in_depth: int, rng):
        self.kernel = kernel
        self.pad = kernel // 2
        scale = np.sqrt(2.0 / (in_depth * kernel))
        self.w = rng.standard_normal((depth, in_depth, kernel)) * scale
        self.b = np.zeros(depth)
        self._windows = None

    def forward(self, x, train, rng):
        # x: (B, L, C); same padding keeps L.
        xp = np.pad(x, ((0, 0), (self.pad, self.kernel - 1 - self.pad), (0, 0)))
        self._windows = sliding_window_view(xp, self.kernel, axis=1)  # (B, L, C, k)
        return np.einsum("blck,ock->blo", self._windows, self.w, optimize=True) + self.b

    def backward(self, grad):
        self.gw = np.einsum("blo,blck->ock", grad, self._windows, optimize=True)
        self.gb = grad.sum(axis=(0, 1))
        # Gradient w.r.t. the input: convolution of the upstream gradient with
        # the kernel (the transpose of the forward correlation).
        k = self.kernel
        gp = np.pad(grad, ((0, 0), (k - 1, k - 1), (0, 0)))
        gwin = sliding_window_view(gp, k, axis=1)  # (B, L + k - 1, O, k)
        gxp = np.einsum("bmoj,ocj->bmc", gwin, self.w[:, :, ::-1], optimize=True)
        length = grad.shape[1]
        return gxp[:, self.pad : self.pad + length, :]

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [self.gw, self.gb]


class _MaxPoolLayer:
    def __init__(self, size: int):
        self.size = size

    def forward(self, x, train, rng):
        b, length, c = x.shape
        pad = (-length) % self.size
        if pad:
            # Repeating the last element keeps ceil-size output; ties route to
            # the first (real) element in backward.
            x = np.concatenate([x, np.repeat(x[:, -1:, :], pad, axis=1)], axis=1)
        self._in_len = length
        groups = x.reshape(b, -1, self.size, c)
        self._argmax = groups.argmax(axis=2)
        return np.take_along_axis(groups, self._argmax[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, grad):
        b, l2, c = grad.shape
        gx = np.zeros((b, l2, self.size, c))
        np.put_along_axis(gx, self._argmax[:, :, None, :], grad[:, :, None, :], axis=2)
        return gx.reshape(b, l2 * self.size, c)[:, : self._in_len, :]

    def params(self):
        return []


class _DenseLayer:
    def __init__(self, units: int, in_features: int, rng, output_head: bool = False):
        if output_head:
            # Small weights and a positive bias keep the final ReLU alive at
            # the start of training (raw IMU inputs are gravity-dominated).
            self.w = rng.standard_normal((in_features, units)) * 0.01
            self.b = np.full(units, 0.3)
        else:
            self.w = rng.standard_normal((in_features, units)) * np.sqrt(2.0 / in_features)
            self.b = np.zeros(units)

    def forward(self, x, train, rng):
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad):
        self.gw = self._x.T @ grad
        self.gb = grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [self.gw, self.gb]


class _ReluLayer:
    def forward(self, x, train, rng):
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return grad * self._mask

    def params(self):
        return []


class _DropoutLayer:
    def __init__(self, prob: float):
        self.prob = prob

    def forward(self, x, train, rng):
        if not train or self.prob == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = rng.random(x.shape) >= self.prob
        self._mask = keep / (1.0 - self.prob)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask

    def params(self):
        return []


class _FlattenLayer:
    def forward(self, x, train, rng):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def params(self):
        return []


class SpeedNet:
    """Runtime model: architecture plus parameter tensors."""

    def __init__(self, architecture: Architecture, seed: int = 0):
        self.architecture = architecture
        rng = np.random.default_rng([seed, 11])
        self.layers = []
        length, depth = architecture.input_len, architecture.input_depth
        flat = None
        for spec in architecture.layers:
            if isinstance(spec, Conv1d):
                self.layers.append(_ConvLayer(spec.depth, spec.kernel, depth, rng))
                depth = spec.depth
            elif isinstance(spec, MaxPool):
                self.layers.append(_MaxPoolLayer(spec.size))
                length = -(-length // spec.size)
            elif isinstance(spec, Flatten):
                self.layers.append(_FlattenLayer())
                flat = length * depth
            elif isinstance(spec, Dense):
                if flat is None:
                    raise ValueError("dense layer before flatten")
                is_head = spec.units == 1 and spec is architecture.layers[-2]
                self.layers.append(_DenseLayer(spec.units, flat, rng, output_head=is_head))
                flat = spec.units
            elif isinstance(spec, Relu):
                self.layers.append(_ReluLayer())
            elif isinstance(spec, Dropout):
                self.layers.append(_DropoutLayer(spec.prob))
            else:
                raise ValueError(f"unknown layer descriptor {spec!r}")
        if flat != 1:
            raise ValueError("network must end in a single output unit")

    # -- passes ------------------------------------------------------------

    def forward(self, windows, train: bool = False, rng=None) -> np.ndarray:
        """Scaled network output, shape (B,). Dropout is active only in train mode."""
        x = np.asarray(windows, dtype=float)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        expected = (self.architecture.input_len, self.architecture.input_depth)
        if x.shape[1:] != expected:
            raise ValueError(f"window shape {x.shape[1:]} does not match {expected}")
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        out = x[:, 0]
        return out[0] if squeeze else out

    def backward(self, grad_out) -> None:
        """Backpropagate d(loss)/d(output); gradients land on the layers."""
        grad = np.atleast_1d(np.asarray(grad_out, dtype=float))[:, None]
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    def predict_speed(self, windows) -> np.ndarray:
        """Regressed speed [m/s]: network output divided by the scale factor."""
        return self.forward(windows, train=False) / self.architecture.scale

    # -- parameter access ----------------------------------------------------

    def parameters(self) -> list:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params():
                out.append((f"layer{i}.{name}", arr))
        return out

    def gradients(self) -> list:
        out = []
        for layer in self.layers:
            if layer.params():
                out.extend(layer.grads())
        return out


def forward(model: SpeedNet, window, train_mode: bool = False, rng=None):
    """Regressed speed for one window (or a batch), in m/s."""
    return model.forward(window, train=train_mode, rng=rng) / model.architecture.scale


def loss(predicted_speed, label_speed, scale: float = DEFAULT_SCALE) -> float:
    """Mean squared error on scale-normalized speeds."""
    predicted_speed = np.atleast_1d(np.asarray(predicted_speed, dtype=float))
    label_speed = np.atleast_1d(np.asarray(label_speed, dtype=float))
    if predicted_speed.shape != label_speed.shape:
        raise ValueError("prediction/label length mismatch")
    if predicted_speed.size == 0:
        raise ValueError("empty batch")
    return float(np.mean((scale * label_speed - scale * predicted_speed) ** 2))


def loss_and_gradients(model: SpeedNet, windows, labels_speed, train_mode=False, rng=None):
    """One forward/backward pass; returns (loss, gradient arrays per parameter)."""
    labels = np.atleast_1d(np.asarray(labels_speed, dtype=float))
    out = model.forward(windows, train=train_mode, rng=rng)
    out = np.atleast_1d(out)
    target = model.architecture.scale * labels
    residual = out - target
    value = float(np.mean(residual**2))
    model.backward(2.0 * residual / residual.shape[0])
    return value, model.gradients()
