"""Implicit finite-difference solver for the diffusion-reaction problem

    s_t = D s_xx + k s^2 + u(x)   on (0,1) x (0,1],
    s(x, 0) = 0,  s(0, t) = s(1, t) = 0.

Crank-Nicolson in time (second order), central differences in space, and a
Newton iteration on the quadratic reaction term at every step. The linear
systems are tridiagonal and solved in banded form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded


@dataclass
class PDEConfig:
    diffusion: float = 0.01
    reaction: float = 0.5
    nx: int = 100
    nt: int = 100
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    t_final: float = 1.0


class NewtonError(RuntimeError):
    pass


def solve_diffusion_reaction(u: np.ndarray, cfg: PDEConfig | None = None) -> np.ndarray:
    """Solve on the nx x nt grid (boundaries included); returns s[x_i, t_j]."""
    cfg = cfg or PDEConfig()
    u = np.asarray(u, dtype=np.float64).ravel()
    if len(u) != cfg.nx:
        raise ValueError(f"source must be sampled on the {cfg.nx}-point spatial grid")
    dx = 1.0 / (cfg.nx - 1)
    dt = cfg.t_final / (cfg.nt - 1)
    r = cfg.diffusion * dt / (2.0 * dx * dx)
    k = cfg.reaction

    s = np.zeros((cfg.nx, cfg.nt))
    u_in = u[1:-1]
    n_in = cfg.nx - 2
    # banded Jacobian rows: superdiagonal, diagonal, subdiagonal
    ab = np.empty((3, n_in))
    ab[0, :] = -r
    ab[2, :] = -r
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0

    def laplacian(v):
        # zero boundary values on both sides
        out = -2.0 * v
        out[1:] += v[:-1]
        out[:-1] += v[1:]
        return out

    prev = s[1:-1, 0]
    for step in range(1, cfg.nt):
        explicit = prev + r * laplacian(prev) + 0.5 * dt * k * prev * prev + dt * u_in
        v = prev.copy()
        converged = False
        for _ in range(cfg.newton_max_iters):
            residual = v - r * laplacian(v) - 0.5 * dt * k * v * v - explicit
            ab[1, :] = 1.0 + 2.0 * r - dt * k * v
            delta = solve_banded((1, 1), ab, residual)
            v -= delta
            if np.max(np.abs(delta)) < cfg.newton_tol:
                converged = True
                break
        if not converged:
            raise NewtonError(f"Newton failed to converge at time step {step}")
        s[1:-1, step] = v
        prev = v
    return s


def space_grid(cfg: PDEConfig) -> np.ndarray:
    return np.linspace(0.0, 1.0, cfg.nx)


def time_grid(cfg: PDEConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_final, cfg.nt)
