"""Gaussian random fields on a fixed sensor grid (RBF kernel, Cholesky draws)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_JITTER = 1e-6


def _default_grid() -> np.ndarray:
    return np.linspace(0.0, 1.0, 100)


@dataclass
class GRFConfig:
    l: float = 0.5
    grid: np.ndarray = field(default_factory=_default_grid)
    jitter: float = 1e-12

    def __post_init__(self):
        if self.l <= 0:
            raise ValueError(f"correlation length must be positive, got {self.l}")
        self.grid = np.asarray(self.grid, dtype=np.float64)


def rbf_kernel(grid: np.ndarray, l: float) -> np.ndarray:
    diff = grid[:, None] - grid[None, :]
    return np.exp(-(diff * diff) / (2.0 * l * l))


class GRFSampler:
    """Caches the Cholesky factor of K + jitter*I for repeated draws."""

    def __init__(self, cfg: GRFConfig):
        self.cfg = cfg
        kernel = rbf_kernel(cfg.grid, cfg.l)
        jitter = cfg.jitter
        eye = np.eye(len(cfg.grid))
        while True:
            try:
                self.chol = np.linalg.cholesky(kernel + jitter * eye)
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > MAX_JITTER:
                    raise np.linalg.LinAlgError(
                        f"covariance factorization failed up to jitter {MAX_JITTER}")
        self.jitter_used = jitter

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        draws = rng.standard_normal((n, len(self.cfg.grid)))
        return draws @ self.chol.T


def grf_sample(cfg: GRFConfig, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean draw with covariance exp(-|xa-xb|^2 / (2 l^2))."""
    return GRFSampler(cfg).sample(rng, 1)[0]
