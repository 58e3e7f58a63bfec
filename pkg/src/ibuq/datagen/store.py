"""Dataset persistence: text manifests with float64 binary blocks, plus CSV."""
from __future__ import annotations

import numpy as np

from ..checkpoint import load_checkpoint, save_checkpoint


def save_dataset(path: str, manifest: dict, arrays: dict) -> None:
    save_checkpoint(path, manifest, arrays)


def load_dataset(path: str):
    return load_checkpoint(path)


def write_csv(path: str, header, rows: np.ndarray) -> None:
    """Write a float table with full precision; %.17g round-trips float64."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.size and rows.shape[1] != len(header):
        raise ValueError(f"{len(header)} columns in header, rows have {rows.shape[1]}")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def read_csv(path: str):
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    return header, data
