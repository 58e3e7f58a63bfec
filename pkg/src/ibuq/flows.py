"""Invertible density models: RealNVP coupling stacks and the GIN variant.

A coupling layer leaves one block of coordinates untouched and applies an
affine map to the other, with scale and shift computed from the untouched
block. The Jacobian is triangular, so the log-determinant is just the sum
of the active scale outputs, and the inverse is available in closed form.

The GIN variant subtracts the per-row mean from every scale output, making
each layer volume-preserving (log-det identically zero); all volume lives
in a learnable diagonal base covariance. Scaling the base draw by sqrt(tau)
before pushing it through the flow samples from p(x)^(1/tau), which is how
the wide input distribution is generated.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, constant, gaussian_log_prob, parameter
from .nets import DenseNet
from .optim import AdamState, LRSchedule, adam_step
from .seeding import spawn_rngs


class CouplingLayer:
    """One affine coupling: parity picks which block is passive."""

    def __init__(self, dim: int, split_index: int, parity: bool,
                 hidden: int, rng: np.random.Generator,
                 s_bound: float = 5.0, volume_preserving: bool = False):
        if not 1 <= split_index < dim:
            raise ValueError(f"split_index must be in [1, {dim}), got {split_index}")
        self.dim = dim
        self.d = split_index
        self.parity = parity
        self.s_bound = s_bound
        self.volume_preserving = volume_preserving
        passive_dim = split_index if not parity else dim - split_index
        active_dim = dim - passive_dim
        self.s_net = DenseNet([passive_dim, hidden, active_dim], "tanh", rng)
        self.t_net = DenseNet([passive_dim, hidden, active_dim], "tanh", rng)
        # zero the output layers so the layer starts as the identity map;
        # otherwise random shears absorb variance the base covariance owns
        for net in (self.s_net, self.t_net):
            net.weights[-1].data[:] = 0.0
            net.biases[-1].data[:] = 0.0

    def _split(self, v: Tensor):
        first, second = v[:, :self.d], v[:, self.d:]
        return (first, second) if not self.parity else (second, first)

    def _join(self, passive: Tensor, active: Tensor) -> Tensor:
        parts = [passive, active] if not self.parity else [active, passive]
        return concat(parts, axis=1)

    def _scale(self, passive: Tensor) -> Tensor:
        s = self.s_net(passive).soft_clip(self.s_bound)
        if self.volume_preserving:
            s = s - s.mean(axis=1, keepdims=True)
        return s

    def forward(self, z: Tensor):
        passive, active = self._split(z)
        s = self._scale(passive)
        out = self._join(passive, active * s.exp() + self.t_net(passive))
        return out, s.sum(axis=1)

    def inverse(self, x: Tensor):
        passive, active = self._split(x)
        s = self._scale(passive)
        out = self._join(passive, (active - self.t_net(passive)) * s.times(-1.0).exp())
        return out, s.sum(axis=1).times(-1.0)

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        out = self.s_net.params(prefix + "s.")
        out.update(self.t_net.params(prefix + "t."))
        return out


def _as_batch(x):
    t = x if isinstance(x, Tensor) else constant(x)
    return (t.reshape(1, -1), True) if t.ndim == 1 else (t, False)


class RealNVPFlow:
    """Coupling stack over a diagonal Gaussian base with learnable log-variances."""

    def __init__(self, dim: int, n_layers: int = 6, hidden: int = 256,
                 rng: np.random.Generator | None = None, s_bound: float = 5.0,
                 volume_preserving: bool = False):
        if dim < 2:
            raise ValueError("coupling flows need dim >= 2")
        self.dim = dim
        split = (dim + 1) // 2
        self.layers = [CouplingLayer(dim, split, parity=bool(i % 2), hidden=hidden,
                                     rng=rng, s_bound=s_bound,
                                     volume_preserving=volume_preserving)
                       for i in range(n_layers)]
        self.base_logvar = parameter(np.zeros(dim))

    def forward_map(self, z):
        t, squeeze = _as_batch(z)
        logdet = None
        for layer in self.layers:
            t, ld = layer.forward(t)
            logdet = ld if logdet is None else logdet + ld
        if squeeze:
            return t.reshape(-1), logdet.reshape(())
        return t, logdet

    def inverse_map(self, x):
        t, squeeze = _as_batch(x)
        logdet = None
        for layer in reversed(self.layers):
            t, ld = layer.inverse(t)
            logdet = ld if logdet is None else logdet + ld
        if squeeze:
            return t.reshape(-1), logdet.reshape(())
        return t, logdet

    def log_prob(self, x) -> Tensor:
        t, squeeze = _as_batch(x)
        z, logdet = self.inverse_map(t)
        std = self.base_logvar.times(0.5).exp()
        ll = gaussian_log_prob(z, constant(np.zeros(self.dim)), std) + logdet
        return ll.reshape(()) if squeeze else ll

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        out = {prefix + "base_logvar": self.base_logvar}
        for i, layer in enumerate(self.layers):
            out.update(layer.params(f"{prefix}L{i}."))
        return out


class GINModel:
    """Volume-preserving flow + diagonal base covariance + temperature sampling.

    One-dimensional data cannot feed a coupling split, so pad_dims auxiliary
    standard-normal channels are appended during fitting and stripped from
    samples; the joint density factorizes, so the data marginal is untouched.
    """

    def __init__(self, data_dim: int, n_layers: int = 6, hidden: int = 256,
                 rng: np.random.Generator | None = None, pad_dims: int | None = None,
                 tau: float = 1.0, s_bound: float = 5.0):
        if pad_dims is None:
            pad_dims = 1 if data_dim == 1 else 0
        if data_dim + pad_dims < 2:
            raise ValueError("data_dim + pad_dims must be >= 2")
        self.data_dim = data_dim
        self.pad_dims = pad_dims
        self.tau = tau
        # fitted data mean, applied as a (volume-preserving) translation so the
        # coupling layers never have to learn a bulk shift from zero init
        self.data_shift = np.zeros(data_dim)
        self.flow = RealNVPFlow(data_dim + pad_dims, n_layers=n_layers, hidden=hidden,
                                rng=rng, s_bound=s_bound, volume_preserving=True)

    @property
    def dim(self) -> int:
        return self.data_dim + self.pad_dims

    def _padded_shift(self) -> np.ndarray:
        return np.concatenate([self.data_shift, np.zeros(self.pad_dims)])

    def log_prob(self, x_padded) -> Tensor:
        t = x_padded if isinstance(x_padded, Tensor) else constant(x_padded)
        return self.flow.log_prob(t - constant(self._padded_shift()))

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        return self.flow.params(prefix)


def gin_sample(gin: GINModel, n: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Draw n samples distributed proportionally to p_X(x)^(1/tau)."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    std = np.sqrt(tau * np.exp(gin.flow.base_logvar.data))
    z = rng.standard_normal((n, gin.dim)) * std
    x, _ = gin.flow.forward_map(constant(z))
    return np.ascontiguousarray(x.data[:, :gin.data_dim] + gin.data_shift)


@dataclass
class FlowFitConfig:
    iterations: int = 200
    schedule: LRSchedule = field(default_factory=lambda: LRSchedule(1e-3, 0.1, 50))
    batch_size: int = 256
    seed: int = 0


def _prepare_data(data: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    data = np.array(data, dtype=np.float64, copy=True)
    if data.ndim != 2 or len(data) < 2:
        raise ValueError("fit needs a 2D array with at least 2 rows")
    degenerate = data.std(axis=0) == 0.0
    if degenerate.any():
        warnings.warn(f"zero-variance coordinates {np.where(degenerate)[0].tolist()}; "
                      "adding 1e-6 jitter")
        data[:, degenerate] += rng.normal(0.0, 1e-6, size=(len(data), int(degenerate.sum())))
    return data


def _fit_mle(params: dict[str, Tensor], log_prob_fn, data: np.ndarray,
             cfg: FlowFitConfig, pad_dims: int = 0) -> list[float]:
    rng_jitter, rng_batch, rng_pad = spawn_rngs(cfg.seed, 3)
    data = _prepare_data(data, rng_jitter)
    n = len(data)
    state = AdamState()
    trace = []
    for it in range(cfg.iterations):
        if cfg.batch_size is not None and n > cfg.batch_size:
            batch = data[rng_batch.choice(n, size=cfg.batch_size, replace=False)]
        else:
            batch = data
        if pad_dims:
            # resampled every iteration so the pad stays independent of the data channel
            aux = rng_pad.standard_normal((len(batch), pad_dims))
            batch = np.hstack([batch, aux])
        for p in params.values():
            p.grad = None
        loss = log_prob_fn(constant(batch)).mean().times(-1.0)
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite flow loss at iteration {it}: {value}")
        loss.backward()
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                 for k, p in params.items()}
        adam_step(params, grads, state, cfg.schedule.lr_at(it))
        trace.append(value)
    return trace


def fit_flow(flow: RealNVPFlow, data: np.ndarray, cfg: FlowFitConfig | None = None) -> list[float]:
    """Maximum-likelihood fit; returns the per-iteration NLL trace."""
    cfg = cfg or FlowFitConfig()
    return _fit_mle(flow.params(), flow.log_prob, data, cfg)


def gin_fit(gin: GINModel, data: np.ndarray, cfg: FlowFitConfig | None = None) -> list[float]:
    """Fit the GIN by maximum likelihood, padding auxiliary channels as needed."""
    cfg = cfg or FlowFitConfig()
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != gin.data_dim:
        raise ValueError(f"expected data of shape (n, {gin.data_dim})")
    # the flow is volume-preserving, so all variance must live in the base;
    # start at the data moments (pad channels stay at variance 1) and absorb
    # the mean into the stored translation
    gin.data_shift[...] = data.mean(axis=0)
    gin.flow.base_logvar.data[:gin.data_dim] = np.log(np.maximum(data.var(axis=0), 1e-12))
    return _fit_mle(gin.params(), gin.log_prob, data, cfg, pad_dims=gin.pad_dims)
