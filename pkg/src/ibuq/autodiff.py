"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and remembers how it was produced: each
operation stores its parents and a closure that pushes the output gradient
back into them. backward() seeds the output gradient and replays the
closures in reverse topological order.

Only the operations this library needs are implemented; everything is
vectorized, so a "node" here is a whole batch, not a scalar.
"""
from __future__ import annotations

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad over the axes numpy broadcast in the forward direction."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_tensor(value) -> "Tensor":
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, parents=(), requires_grad=None):
        self.data = np.asarray(data, dtype=np.float64)
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = tuple(p for p in parents if p.requires_grad)
        self._backward = None

    # ---- graph plumbing ----

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(np.asarray(self.data).reshape(()))

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy() if grad.base is not None or grad.flags.writeable is False else grad
        else:
            self.grad = self.grad + grad

    def backward(self, seed=None) -> None:
        """Backpropagate from this tensor; seed defaults to 1 (scalar outputs)."""
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed requires a scalar tensor")
            seed = np.ones_like(self.data)
        # iterative depth-first topological sort; graphs are shallow but wide
        order, stack, visited = [], [(self, False)], set()
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.asarray(seed, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- arithmetic ----

    def __add__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data + other.data, (self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g, other.data.shape))
            out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(-g)
        return out

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data * other.data, (self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g * other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g * self.data, other.data.shape))
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data / other.data, (self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g / other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-g * self.data / (other.data * other.data),
                                                   other.data.shape))
            out._backward = backward
        return out

    def __rtruediv__(self, other):
        return _as_tensor(other) / self

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = Tensor(self.data ** n, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * n * self.data ** (n - 1))
        return out

    def __matmul__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data @ other.data, (self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(g @ other.data.T)
                if other.requires_grad:
                    other._accumulate(self.data.T @ g)
            out._backward = backward
        return out

    # ---- elementwise nonlinearities ----

    def tanh(self):
        y = np.tanh(self.data)
        out = Tensor(y, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * (1.0 - y * y))
        return out

    def sigmoid(self):
        y = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(y, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * y * (1.0 - y))
        return out

    def relu(self):
        y = np.maximum(self.data, 0.0)
        out = Tensor(y, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * (self.data > 0.0))
        return out

    def exp(self):
        y = np.exp(self.data)
        out = Tensor(y, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * y)
        return out

    def log(self):
        out = Tensor(np.log(self.data), (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g / self.data)
        return out

    def square(self):
        out = Tensor(self.data * self.data, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * (2.0 * self.data))
        return out

    def clip_min(self, lo: float):
        """Elementwise max(self, lo); subgradient 0 on the clamped side."""
        y = np.maximum(self.data, lo)
        out = Tensor(y, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * (self.data > lo))
        return out

    def soft_clip(self, bound: float):
        """bound * tanh(x / bound): identity near 0, saturates at +-bound."""
        return self.times(1.0 / bound).tanh().times(bound)

    def times(self, c: float):
        # scalar multiply without building a constant Tensor
        out = Tensor(self.data * c, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * c)
        return out

    # ---- reductions and shape ----

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:
            def backward(g):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.data.shape))
            out._backward = backward
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims).times(1.0 / n)

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g.reshape(self.data.shape))
        return out

    def transpose(self):
        if self.data.ndim != 2:
            raise ValueError("transpose is only defined for 2D tensors")
        out = Tensor(self.data.T, (self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g.T)
        return out

    def __getitem__(self, key):
        # basic slicing only: the backward scatter assigns, so a key that
        # selects the same element twice would drop gradient contributions
        out = Tensor(self.data[key], (self,))
        if out.requires_grad:
            def backward(g):
                full = np.zeros_like(self.data)
                full[key] = g
                self._accumulate(full)
            out._backward = backward
        return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def backward(g):
            for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(a, b)
                    t._accumulate(g[tuple(idx)])
        out._backward = backward
    return out


def constant(value) -> Tensor:
    """A graph leaf that never receives gradients."""
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=False)


def parameter(value) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64, copy=True), requires_grad=True)


def gaussian_log_prob(x: Tensor, mean: Tensor, std: Tensor) -> Tensor:
    """Row-wise diagonal Gaussian log-density, summed over the last axis."""
    z = (x - mean) / std
    return (z.square() + std.log().times(2.0)).sum(axis=-1).times(-0.5) \
        - constant(0.5 * LOG_2PI * x.shape[-1])
