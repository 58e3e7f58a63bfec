"""Operator-learning data pipeline: GRF inputs pushed through the PDE solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import new_rng
from .grf import GRFConfig, GRFSampler
from .pde import PDEConfig, solve_diffusion_reaction, space_grid, time_grid
from .store import load_dataset, save_dataset


@dataclass
class OperatorDataset:
    """N input/output function pairs on a shared grid.

    u_sensors holds the input functions at the nx sensor locations; fields
    holds the full solution surfaces s[x_i, t_j]. Per-function provenance
    seeds make any single pair reproducible in isolation.
    """
    u_sensors: np.ndarray          # (N, nx)
    fields: np.ndarray             # (N, nx, nt)
    sensor_grid: np.ndarray        # (nx,)
    t_grid: np.ndarray             # (nt,)
    l: float
    noise_std: float
    seeds: np.ndarray              # (N,)

    def __len__(self) -> int:
        return len(self.u_sensors)

    def query_grid(self) -> np.ndarray:
        """All (x, t) pairs of the solution grid, shape (nx*nt, 2).

        Row i*nt + j holds (x_i, t_j), matching fields.reshape(n, nx*nt).
        """
        xx, tt = np.meshgrid(self.sensor_grid, self.t_grid, indexing="ij")
        return np.column_stack([xx.ravel(), tt.ravel()])


def build_operator_dataset(n: int, l: float, noise_std: float,
                           rng: np.random.Generator,
                           pde: PDEConfig | None = None,
                           u_noise_std: float = 0.0) -> OperatorDataset:
    """Draw n GRF sources at correlation length l and solve the PDE for each."""
    if n < 1:
        raise ValueError("need at least one function pair")
    pde = pde or PDEConfig()
    grid = space_grid(pde)
    sampler = GRFSampler(GRFConfig(l=l, grid=grid))
    seeds = rng.integers(0, 2 ** 63 - 1, size=n)
    u_all = np.empty((n, pde.nx))
    fields = np.empty((n, pde.nx, pde.nt))
    for i, seed in enumerate(seeds):
        f_rng = new_rng(int(seed))
        u = sampler.sample(f_rng, 1)[0]
        try:
            s = solve_diffusion_reaction(u, pde)
        except Exception as err:
            raise RuntimeError(f"solver failed for function {i}: {err}") from err
        if noise_std > 0:
            s = s + f_rng.normal(0.0, noise_std, size=s.shape)
        if u_noise_std > 0:
            u = u + f_rng.normal(0.0, u_noise_std, size=u.shape)
        u_all[i] = u
        fields[i] = s
    return OperatorDataset(u_sensors=u_all, fields=fields, sensor_grid=grid,
                           t_grid=time_grid(pde), l=l, noise_std=noise_std,
                           seeds=seeds)


def save_operator_dataset(path: str, ds: OperatorDataset,
                          pde: PDEConfig | None = None) -> None:
    pde = pde or PDEConfig()
    manifest = {"type": "operator", "n": len(ds), "l": ds.l, "noise_std": ds.noise_std,
                "nx": pde.nx, "nt": pde.nt, "diffusion": pde.diffusion,
                "reaction": pde.reaction}
    save_dataset(path, manifest, {"u_sensors": ds.u_sensors, "fields": ds.fields,
                                  "sensor_grid": ds.sensor_grid, "t_grid": ds.t_grid,
                                  "seeds": ds.seeds.astype(np.float64)})


def load_operator_dataset(path: str) -> OperatorDataset:
    manifest, arrays = load_dataset(path)
    if manifest.get("type") != "operator":
        raise ValueError(f"{path} is not an operator dataset")
    return OperatorDataset(u_sensors=arrays["u_sensors"], fields=arrays["fields"],
                           sensor_grid=arrays["sensor_grid"], t_grid=arrays["t_grid"],
                           l=float(manifest["l"]), noise_std=float(manifest["noise_std"]),
                           seeds=arrays["seeds"].astype(np.int64))
