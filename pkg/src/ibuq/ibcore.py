"""Information-bottleneck machinery.

The encoder is a gated stochastic map: a gate vector m(x) in (0,1)^d_z mixes
a deterministic latent zbar(x) with standard-normal noise,

    z = diag(m) zbar(x) + diag(1 - m) z0,      z0 ~ N(0, I),

so q_E(z|x) = N(diag(m) zbar, diag(1-m)^2). Gates near 1 give a reliable
deterministic latent, gates near 0 an uninformative one; the gate is the
model's own in-distribution score.

Two Monte Carlo surrogates drive training: the prediction term (mean decoder
log-likelihood at sampled latents) and the compression term (mean encoder
log-density minus marginal-flow log-density at latents sampled from wide
inputs). The objective is prediction minus beta times compression, maximized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, constant, gaussian_log_prob
from .flows import RealNVPFlow
from .nets import DenseNet


class Encoder:
    def __init__(self, m_net: DenseNet, zbar_net: DenseNet, eps_gate: float = 1e-3):
        if m_net.layer_widths[-1] != zbar_net.layer_widths[-1]:
            raise ValueError("m_net and zbar_net must share the latent dimension")
        self.m_net = m_net
        self.zbar_net = zbar_net
        self.d_z = m_net.layer_widths[-1]
        self.eps_gate = eps_gate

    def gate(self, x) -> Tensor:
        # affine clamp keeps the conditional std 1-m strictly positive
        return self.m_net(x).sigmoid().times(1.0 - 2.0 * self.eps_gate) + self.eps_gate

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        out = self.m_net.params(prefix + "m.")
        out.update(self.zbar_net.params(prefix + "zbar."))
        return out


def encode_sample(enc: Encoder, x, rng: np.random.Generator):
    """Reparameterized draw from q_E(z|x); returns (z, gate)."""
    t = x if isinstance(x, Tensor) else constant(x)
    squeeze = t.ndim == 1
    if squeeze:
        t = t.reshape(1, -1)
    m = enc.gate(t)
    zbar = enc.zbar_net(t)
    z0 = rng.standard_normal((t.shape[0], enc.d_z))
    z = m * zbar + (1.0 - m) * constant(z0)
    if squeeze:
        return z.reshape(-1), m.reshape(-1)
    return z, m


def encoder_log_prob(enc: Encoder, z, x) -> Tensor:
    t = x if isinstance(x, Tensor) else constant(x)
    zt = z if isinstance(z, Tensor) else constant(z)
    squeeze = t.ndim == 1
    if squeeze:
        t = t.reshape(1, -1)
        zt = zt.reshape(1, -1)
    m = enc.gate(t)
    ll = gaussian_log_prob(zt, m * enc.zbar_net(t), 1.0 - m)
    return ll.reshape(()) if squeeze else ll


class GaussianDecoder:
    def __init__(self, net: DenseNet, sigma_floor: float = 1e-4):
        if net.layer_widths[-1] % 2 != 0:
            raise ValueError("decoder net must emit (mu, log sigma) pairs")
        self.net = net
        self.d_y = net.layer_widths[-1] // 2
        self.sigma_floor = sigma_floor

    def forward(self, z):
        out = self.net(z if isinstance(z, Tensor) else constant(z))
        squeeze = out.ndim == 1
        if squeeze:
            out = out.reshape(1, -1)
        mu = out[:, :self.d_y]
        sigma = out[:, self.d_y:].clip_min(np.log(self.sigma_floor)).exp()
        if squeeze:
            return mu.reshape(-1), sigma.reshape(-1)
        return mu, sigma

    __call__ = forward

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        return self.net.params(prefix)


def decoder_log_prob(dec: GaussianDecoder, y, z) -> Tensor:
    yt = y if isinstance(y, Tensor) else constant(y)
    mu, sigma = dec.forward(z)
    return gaussian_log_prob(yt, mu, sigma)


class IBModel:
    """Encoder + Gaussian decoder + marginal flow, tied by the trade-off beta."""

    def __init__(self, encoder: Encoder, decoder: GaussianDecoder,
                 marginal: RealNVPFlow, beta: float):
        if marginal.dim != encoder.d_z:
            raise ValueError("marginal flow dimension must equal d_z")
        self.encoder = encoder
        self.decoder = decoder
        self.marginal = marginal
        self.beta = beta

    def params(self) -> dict[str, Tensor]:
        out = self.encoder.params("enc.")
        out.update(self.decoder.params("dec."))
        out.update(self.marginal.params("marg."))
        return out


@dataclass
class MixupConfig:
    enabled: bool = True
    alpha: float = 0.005


def mixup_batch(x: np.ndarray, y: np.ndarray, cfg: MixupConfig,
                rng: np.random.Generator):
    """Beta(alpha, alpha) convex combinations of the batch with a permuted copy."""
    if not cfg.enabled:
        return x, y
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    perm = rng.permutation(len(x))
    lam = rng.beta(cfg.alpha, cfg.alpha, size=(len(x), 1))
    return lam * x + (1.0 - lam) * x[perm], lam * y + (1.0 - lam) * y[perm]


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2D (batch, dim) array, got shape {a.shape}")
    return a


def estimate_iyz(model: IBModel, x: np.ndarray, y: np.ndarray,
                 rng: np.random.Generator) -> Tensor:
    """Mean decoder log-likelihood at one latent draw per datum.

    The label entropy H(Y) is an additive constant and is dropped.
    """
    z, _ = encode_sample(model.encoder, _as_matrix(x, "x"), rng)
    mu, sigma = model.decoder.forward(z)
    return gaussian_log_prob(constant(_as_matrix(y, "y")), mu, sigma).mean()


def estimate_izx(model: IBModel, x_wide: np.ndarray,
                 rng: np.random.Generator) -> Tensor:
    """Mean [log q_E(z|x) - log e(z)] over wide inputs, one draw per input."""
    t = constant(_as_matrix(x_wide, "x_wide"))
    m = model.encoder.gate(t)
    zbar = model.encoder.zbar_net(t)
    mean = m * zbar
    z0 = rng.standard_normal((t.shape[0], model.encoder.d_z))
    z = mean + (1.0 - m) * constant(z0)
    enc_ll = gaussian_log_prob(z, mean, 1.0 - m)
    return (enc_ll - model.marginal.log_prob(z)).mean()


def ib_loss(model: IBModel, x: np.ndarray, y: np.ndarray, x_wide: np.ndarray,
            rng: np.random.Generator):
    """The training objective IYZ - beta * IXZ (maximized) plus its components."""
    iyz = estimate_iyz(model, x, y, rng)
    izx = estimate_izx(model, x_wide, rng)
    iyz_val, izx_val = float(iyz.data), float(izx.data)
    if not np.isfinite(iyz_val):
        raise FloatingPointError(f"prediction term IYZ is not finite: {iyz_val}")
    if not np.isfinite(izx_val):
        raise FloatingPointError(f"compression term IXZ is not finite: {izx_val}")
    objective = iyz if model.beta == 0.0 else iyz - izx.times(model.beta)
    return objective, iyz_val, izx_val
