"""The 1D discontinuous benchmark and its evaluation regions."""
from __future__ import annotations

import numpy as np

# training measurements live here; the complement of the ID region in [-1, 1]
# is the out-of-distribution region
ID_INTERVALS = ((-0.8, -0.2), (0.2, 0.8))
OOD_INTERVALS = ((-1.0, -0.8), (-0.2, 0.2), (0.8, 1.0))


def discontinuous_fn(x: np.ndarray) -> np.ndarray:
    """Piecewise sin^3 function with a jump at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    left = 0.5 * (np.sin(2.0 * np.pi * x) ** 3 - 1.0)
    right = 0.5 * (np.sin(3.0 * np.pi * x) ** 3 + 1.0)
    return np.where(x < 0.0, left, right)


def sample_discontinuous(n: int, noise_std: float, rng: np.random.Generator):
    """n/2 equidistant noisy measurements per training interval; returns (x, u)."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be an even count >= 2, got {n}")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    half = n // 2
    x = np.concatenate([np.linspace(a, b, half) for a, b in ID_INTERVALS])
    u = discontinuous_fn(x)
    if noise_std > 0:
        u = u + rng.normal(0.0, noise_std, size=u.shape)
    return x[:, None], u[:, None]


def region_mask(x: np.ndarray, intervals) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    mask = np.zeros(len(x), dtype=bool)
    for a, b in intervals:
        mask |= (x >= a) & (x <= b)
    return mask
