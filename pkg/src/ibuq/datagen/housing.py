"""California-housing ingestion and LOF-based ID/OOD partitioning.

Scores follow the classic local-outlier-factor construction: k-distance,
tie-inclusive neighborhoods, reachability distances, local reachability
density, and the LOF ratio, reported on the negative scale where inliers sit
near -1 and outliers drift more negative.

The library never touches the network: the raw table comes from a local CSV
(8 feature columns then the target, one header row). fetch_housing is the
explicit download helper behind the CLI convenience command.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..seeding import new_rng

HOUSING_ROWS = 20640
HOUSING_FEATURES = 8
DEFAULT_THRESHOLDS = (-1.2, -1.5, -2.0)
REACH_FLOOR = 1e-12

# rows per pairwise-distance block; keeps the (chunk, n, d) buffer ~64 MB
_CHUNK_ELEMS = 8 << 20


def lof_scores(points: np.ndarray, k: int) -> np.ndarray:
    """Negative LOF score per point (higher = more inlying, inliers ~ -1)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2D array")
    n, d = pts.shape
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")

    chunk = max(1, _CHUNK_ELEMS // (n * d))
    k_dist = np.empty(n)
    nbr_idx: list[np.ndarray] = []
    nbr_dist: list[np.ndarray] = []
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        # differences computed directly: no dot-product cancellation, and the
        # arithmetic matches a per-pair loop bit for bit
        diff = pts[lo:hi, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        rows = np.arange(lo, hi)
        dist[rows - lo, rows] = np.inf
        kd = np.partition(dist, k - 1, axis=1)[:, k - 1]
        k_dist[lo:hi] = kd
        # tie-inclusive neighborhood: everything within the k-distance
        for i in range(hi - lo):
            members = np.flatnonzero(dist[i] <= kd[i])
            nbr_idx.append(members)
            nbr_dist.append(dist[i, members])

    counts = np.array([len(ix) for ix in nbr_idx])
    flat_idx = np.concatenate(nbr_idx)
    flat_dist = np.concatenate(nbr_dist)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    reach = np.maximum(np.maximum(k_dist[flat_idx], flat_dist), REACH_FLOOR)
    lrd = counts / np.add.reduceat(reach, starts)
    lof = np.add.reduceat(lrd[flat_idx], starts) / counts / lrd
    return -lof


@dataclass
class HousingSplit:
    """Index partition of the table: ID train/test plus three OOD bands."""
    id_train: np.ndarray
    id_test: np.ndarray
    ood_parts: tuple
    thresholds: tuple
    scores: np.ndarray

    def all_parts(self) -> dict[str, np.ndarray]:
        return {"id_train": self.id_train, "id_test": self.id_test,
                "ood_part1": self.ood_parts[0], "ood_part2": self.ood_parts[1],
                "ood_part3": self.ood_parts[2]}


def split_housing(table: np.ndarray, k: int = 20,
                  thresholds: tuple = DEFAULT_THRESHOLDS,
                  split_seed: int = 0) -> HousingSplit:
    """Standardize features, score with LOF, band, and split ID 2/3 : 1/3."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] != HOUSING_FEATURES + 1:
        raise ValueError(f"expected a table with {HOUSING_FEATURES} feature columns "
                         f"plus a target, got shape {table.shape}")
    t1, t2, t3 = thresholds
    if not t3 < t2 < t1 < 0:
        raise ValueError(f"thresholds must be descending negatives, got {thresholds}")
    feats = table[:, :HOUSING_FEATURES]
    std = feats.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    scores = lof_scores((feats - feats.mean(axis=0)) / std, k)

    id_all = np.flatnonzero(scores > t1)
    part1 = np.flatnonzero((scores > t2) & (scores <= t1))
    part2 = np.flatnonzero((scores > t3) & (scores <= t2))
    part3 = np.flatnonzero(scores <= t3)

    perm = new_rng(split_seed).permutation(len(id_all))
    n_train = int(round(len(id_all) * 2.0 / 3.0))
    return HousingSplit(id_train=np.sort(id_all[perm[:n_train]]),
                        id_test=np.sort(id_all[perm[n_train:]]),
                        ood_parts=(part1, part2, part3),
                        thresholds=tuple(thresholds),
                        scores=scores)


def load_housing_csv(path: str, expect_rows: int | None = HOUSING_ROWS) -> np.ndarray:
    """Read the housing table (header row, 8 features then target)."""
    table = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] != HOUSING_FEATURES + 1:
        raise ValueError(f"{path}: expected {HOUSING_FEATURES + 1} columns, "
                         f"got shape {table.shape}")
    if expect_rows is not None and len(table) != expect_rows:
        raise ValueError(f"{path}: expected {expect_rows} rows, got {len(table)}")
    if not np.all(np.isfinite(table)):
        raise ValueError(f"{path}: table contains non-finite entries")
    return table


def fetch_housing(dest_path: str) -> str:
    """Download the dataset via scikit-learn and write the documented CSV."""
    from sklearn.datasets import fetch_california_housing  # deferred: needs network

    bunch = fetch_california_housing()
    table = np.column_stack([bunch.data, bunch.target])
    header = ",".join(list(bunch.feature_names) + ["MedHouseVal"])
    os.makedirs(os.path.dirname(os.path.abspath(dest_path)), exist_ok=True)
    np.savetxt(dest_path, table, delimiter=",", header=header, comments="", fmt="%.17g")
    return dest_path


def default_csv_path() -> str:
    """Resolution order: $IBUQ_HOUSING_CSV, then ./data/california_housing.csv."""
    env = os.environ.get("IBUQ_HOUSING_CSV")
    if env:
        return env
    return os.path.join("data", "california_housing.csv")
