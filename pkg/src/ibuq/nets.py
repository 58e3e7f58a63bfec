"""Dense feed-forward networks with named parameters."""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor, constant, parameter

_ACTIVATIONS = ("tanh", "relu", "identity")


class ShapeError(ValueError):
    pass


def xavier_normal(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


class DenseNet:
    """Fully connected net: affine layers with a fixed hidden activation.

    layer_widths lists input dim, hidden widths, output dim. The output
    layer is always linear. Parameters are named W0/b0, W1/b1, ... so they
    can be checkpointed and optimized as a flat dict.
    """

    def __init__(self, layer_widths, activation: str = "tanh",
                 rng: np.random.Generator | None = None, init: str = "xavier-normal"):
        widths = [int(w) for w in layer_widths]
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"layer_widths must be >= 2 positive entries, got {widths}")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {activation!r}")
        self.layer_widths = widths
        self.activation = activation
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            if init == "xavier-normal":
                if rng is None:
                    raise ValueError("xavier-normal init needs an rng")
                w = xavier_normal(rng, fan_in, fan_out)
            elif init == "zeros":
                w = np.zeros((fan_in, fan_out))
            else:
                raise ValueError(f"unknown init {init!r}")
            self.weights.append(parameter(w))
            self.biases.append(parameter(np.zeros(fan_out)))

    def forward(self, x) -> Tensor:
        t = x if isinstance(x, Tensor) else constant(x)
        squeeze = t.ndim == 1
        if squeeze:
            t = t.reshape(1, -1)
        if t.shape[-1] != self.layer_widths[0]:
            raise ShapeError(
                f"input dim {t.shape[-1]} does not match layer_widths[0]={self.layer_widths[0]}")
        h = t
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                if self.activation == "tanh":
                    h = h.tanh()
                elif self.activation == "relu":
                    h = h.relu()
        return h.reshape(-1) if squeeze else h

    __call__ = forward

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}W{i}"] = w
            out[f"{prefix}b{i}"] = b
        return out

    def param_count(self) -> int:
        return sum(w.data.size + b.data.size for w, b in zip(self.weights, self.biases))


def gradient(loss_fn, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Evaluate loss_fn(params) and return reverse-mode gradients per name."""
    for p in params.values():
        p.grad = None
    loss = loss_fn(params)
    value = float(loss.data)
    if not np.isfinite(value):
        raise FloatingPointError(f"loss is not finite: {value}")
    loss.backward()
    return {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in params.items()}
