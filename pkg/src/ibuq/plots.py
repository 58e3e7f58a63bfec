"""Figure rendering for CLI reports. Every function writes one image file.

All plots read plain arrays (usually straight from the CSV reports) so they
can be regenerated from artifacts alone. Styling is kept local to each
figure; nothing global is mutated.
"""
from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_GRID_KW = {"alpha": 0.3, "linewidth": 0.6}


def plot_info_plane(rows: np.ndarray, path: str) -> None:
    """Scatter of (IXZ, IYZ) per run, labeled by beta; selected runs ringed.

    rows follow regression.SWEEP_COLUMNS: beta, seed, objective, iyz, izx,
    selected.
    """
    rows = np.asarray(rows, dtype=np.float64)
    betas = rows[:, 0]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    uniq = np.unique(betas)
    cmap = plt.get_cmap("viridis", len(uniq))
    for i, b in enumerate(uniq):
        sub = rows[betas == b]
        ok = np.isfinite(sub[:, 2])
        ax.scatter(sub[ok, 4], sub[ok, 3], s=28, color=cmap(i), label=f"beta={b:g}")
        sel = sub[(sub[:, 5] > 0) & ok]
        if len(sel):
            ax.scatter(sel[:, 4], sel[:, 3], s=110, facecolors="none",
                       edgecolors=cmap(i), linewidths=1.6)
    ax.set_xlabel(r"$\hat{I}(X;Z)$")
    ax.set_ylabel(r"$\hat{I}(Y;Z)$")
    ax.grid(True, **_GRID_KW)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_prediction_band(x: np.ndarray, mean: np.ndarray, std: np.ndarray,
                         path: str, train_x=None, train_y=None,
                         truth=None, n_std: float = 2.0) -> None:
    """Predictive mean with a +-n_std band; training points overlaid."""
    x = np.asarray(x, dtype=np.float64).ravel()
    mean = np.asarray(mean, dtype=np.float64).ravel()
    std = np.asarray(std, dtype=np.float64).ravel()
    order = np.argsort(x)
    x, mean, std = x[order], mean[order], std[order]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.fill_between(x, mean - n_std * std, mean + n_std * std,
                    alpha=0.3, linewidth=0, label=f"mean ± {n_std:g} std")
    ax.plot(x, mean, lw=1.5, label="predictive mean")
    if truth is not None:
        ax.plot(x, np.asarray(truth, dtype=np.float64).ravel()[order], "k--",
                lw=1.0, label="exact")
    if train_x is not None and train_y is not None:
        ax.plot(np.ravel(train_x), np.ravel(train_y), "r.", ms=6,
                label="training data")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.grid(True, **_GRID_KW)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rmse_by_length(rows: np.ndarray, path: str, train_l: float | None = None) -> None:
    """RMSE and mean predicted std against GRF correlation length."""
    rows = np.asarray(rows, dtype=np.float64)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for ax, col, name in ((axes[0], 1, "mean-field RMSE"), (axes[1], 2, "mean predicted std")):
        ax.plot(rows[:, 0], rows[:, col], "o-", lw=1.4)
        if train_l is not None:
            ax.axvline(train_l, color="gray", ls=":", lw=1.0, label="training l")
            ax.legend(fontsize=8)
        ax.set_xlabel("correlation length l")
        ax.set_ylabel(name)
        ax.grid(True, **_GRID_KW)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_field(x_grid: np.ndarray, t_grid: np.ndarray, mean: np.ndarray,
               std: np.ndarray, path: str, truth=None,
               cut_times=(0.25, 0.5, 0.75), n_std: float = 2.0) -> None:
    """Heatmaps of the predicted field plus section cuts at fixed times.

    mean/std/truth are (nx, nt) surfaces on the x_grid x t_grid lattice.
    """
    x_grid = np.asarray(x_grid, dtype=np.float64)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    panels = [("predictive mean", mean), ("predictive std", std)]
    if truth is not None:
        panels.insert(0, ("reference", np.asarray(truth, dtype=np.float64)))
    n_top = len(panels)
    fig, axes = plt.subplots(2, max(n_top, len(cut_times)),
                             figsize=(3.4 * max(n_top, len(cut_times)), 6.2))
    extent = (t_grid[0], t_grid[-1], x_grid[0], x_grid[-1])
    for j in range(axes.shape[1]):
        if j < n_top:
            name, surf = panels[j]
            im = axes[0, j].imshow(surf, origin="lower", aspect="auto",
                                   extent=extent, cmap="viridis")
            axes[0, j].set_title(name, fontsize=9)
            axes[0, j].set_xlabel("t")
            axes[0, j].set_ylabel("x")
            fig.colorbar(im, ax=axes[0, j], shrink=0.85)
        else:
            axes[0, j].axis("off")
    for j, t_cut in enumerate(cut_times):
        ax = axes[1, j]
        k = int(np.argmin(np.abs(t_grid - t_cut)))
        ax.fill_between(x_grid, mean[:, k] - n_std * std[:, k],
                        mean[:, k] + n_std * std[:, k], alpha=0.3, linewidth=0)
        ax.plot(x_grid, mean[:, k], lw=1.3, label="mean")
        if truth is not None:
            ax.plot(x_grid, panels[0][1][:, k], "k--", lw=1.0, label="reference")
        ax.set_title(f"t = {t_grid[k]:.2f}", fontsize=9)
        ax.set_xlabel("x")
        ax.set_ylabel("s")
        ax.grid(True, **_GRID_KW)
        if j == 0:
            ax.legend(fontsize=8)
    for j in range(len(cut_times), axes.shape[1]):
        axes[1, j].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_metrics_trace(metrics: np.ndarray, path: str) -> None:
    """Objective and component traces over training iterations."""
    metrics = np.asarray(metrics, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(metrics[:, 0], metrics[:, 1], lw=1.0, label="objective")
    ax.plot(metrics[:, 0], metrics[:, 2], lw=1.0, label=r"$\hat{I}(Y;Z)$")
    ax.plot(metrics[:, 0], metrics[:, 3], lw=1.0, label=r"$\hat{I}(X;Z)$")
    ax.set_xlabel("iteration")
    ax.set_ylabel("value")
    ax.grid(True, **_GRID_KW)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
