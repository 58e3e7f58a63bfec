"""Seeded randomness: every stream derives from one 64-bit master seed."""
from __future__ import annotations

import numpy as np


def new_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """n independent generators; reproducible and order-stable for a seed."""
    return [np.random.Generator(np.random.PCG64(ss))
            for ss in np.random.SeedSequence(seed).spawn(n)]


def child_seeds(seed: int, n: int) -> list[int]:
    """n integer sub-seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]
