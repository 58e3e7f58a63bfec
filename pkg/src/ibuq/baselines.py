"""Deep-ensemble baseline: the same MSE fit repeated with fresh initializations.

Every member trains on identical data (no bootstrap); diversity comes from
initialization and, when minibatching, shuffle order. The predictive mean and
uncertainty are the cross-member mean and population standard deviation.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import constant
from .checkpoint import load_checkpoint, save_checkpoint
from .nets import DenseNet, gradient
from .optim import AdamState, adam_step
from .regression import TrainingError, _as_xy
from .seeding import new_rng

__all__ = ["EnsembleConfig", "DeepEnsemble", "train_deep_ensemble",
           "ensemble_predict", "save_ensemble", "load_ensemble"]


@dataclass
class EnsembleConfig:
    members: int = 20
    train_steps: int = 2000
    weight_decay: float = 4e-6
    # the reference settings leave the learning rate unstated; Adam default
    learning_rate: float = 1e-3
    net_hidden: tuple = (50, 50)
    batch_size: int = 256

    def __post_init__(self):
        if self.members < 2:
            raise ValueError("an ensemble needs at least 2 members")


@dataclass
class DeepEnsemble:
    members: list
    member_seeds: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def predict(self, x):
        return ensemble_predict(self, x)


def _train_member(x: np.ndarray, y: np.ndarray, cfg: EnsembleConfig, seed: int):
    rng = new_rng(seed)
    net = DenseNet([x.shape[1]] + list(cfg.net_hidden) + [y.shape[1]], "tanh", rng)
    params = net.params()
    state = AdamState()
    n = len(x)
    full_batch = n <= cfg.batch_size

    def loss_fn(_, xb, yb):
        loss = (net(constant(xb)) - constant(yb)).square().mean()
        if cfg.weight_decay > 0:
            penalty = None
            for w in net.weights:
                term = w.square().sum()
                penalty = term if penalty is None else penalty + term
            loss = loss + penalty.times(cfg.weight_decay)
        return loss

    for _ in range(cfg.train_steps):
        if full_batch:
            xb, yb = x, y
        else:
            idx = rng.choice(n, size=cfg.batch_size, replace=False)
            xb, yb = x[idx], y[idx]
        grads = gradient(lambda p: loss_fn(p, xb, yb), params)
        adam_step(params, grads, state, cfg.learning_rate)
    if not all(np.isfinite(p.data).all() for p in params.values()):
        raise FloatingPointError("non-finite parameters after training")
    return net


def train_deep_ensemble(x: np.ndarray, y: np.ndarray,
                        cfg: EnsembleConfig | None = None,
                        rng: np.random.Generator | None = None,
                        member_seeds=None, workers: int | None = None) -> DeepEnsemble:
    """Train cfg.members independent nets; returns the surviving ensemble.

    Members diverging to non-finite values are dropped with a warning; at
    least 2 must survive. Each member derives its own rng from member_seeds
    (drawn from rng when not given), so the result is independent of the
    worker count and, as a set, of seed order.
    """
    cfg = cfg or EnsembleConfig()
    rng = rng or new_rng(0)
    x, y = _as_xy(x, y)
    if len(x) == 0 or len(x) != len(y):
        raise ValueError("need matching nonempty x and y")
    if member_seeds is None:
        member_seeds = [int(s) for s in rng.integers(0, 2 ** 63 - 1, size=cfg.members)]
    elif len(member_seeds) != cfg.members:
        raise ValueError(f"expected {cfg.members} member seeds, got {len(member_seeds)}")
    if workers is None:
        workers = min(4, os.cpu_count() or 1)

    def run(seed: int):
        try:
            return _train_member(x, y, cfg, seed)
        except FloatingPointError as err:
            warnings.warn(f"ensemble member (seed {seed}) diverged: {err}")
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trained = list(pool.map(run, member_seeds))
    else:
        trained = [run(s) for s in member_seeds]
    members = [net for net in trained if net is not None]
    seeds = [s for net, s in zip(trained, member_seeds) if net is not None]
    if len(members) < 2:
        raise TrainingError(f"only {len(members)} of {cfg.members} members survived", [])
    return DeepEnsemble(members=members, member_seeds=seeds)


def ensemble_predict(ensemble: DeepEnsemble, x: np.ndarray):
    """Cross-member (mean, population std) at x; shapes (n, d_y)."""
    members = ensemble.members
    if len(members) == 0:
        raise ValueError("ensemble is empty")
    if len(ensemble.member_seeds) == len(members):
        # reduce in seed order so the statistics are bit-identical however
        # the members were permuted
        order = np.argsort(np.asarray(ensemble.member_seeds), kind="stable")
        members = [members[i] for i in order]
    x = _as_xy(x)
    preds = np.stack([net(constant(x)).data for net in members])
    return preds.mean(axis=0), preds.std(axis=0)


def save_ensemble(path: str, ensemble: DeepEnsemble) -> None:
    widths = ensemble.members[0].layer_widths
    manifest = {"kind": "ibuq-ensemble", "members": len(ensemble.members),
                "layer_widths": ",".join(str(w) for w in widths),
                "member_seeds": ",".join(str(s) for s in ensemble.member_seeds)}
    arrays = {}
    for i, net in enumerate(ensemble.members):
        for name, p in net.params(f"m{i}.").items():
            arrays[name] = p.data
    save_checkpoint(path, manifest, arrays)


def load_ensemble(path: str) -> DeepEnsemble:
    manifest, arrays = load_checkpoint(path)
    if manifest.get("kind") != "ibuq-ensemble":
        raise ValueError(f"{path} is not an ensemble checkpoint")
    widths = [int(w) for w in manifest["layer_widths"].split(",")]
    count = int(manifest["members"])
    seeds = [int(s) for s in manifest["member_seeds"].split(",")] \
        if manifest.get("member_seeds") else []
    members = []
    for i in range(count):
        net = DenseNet(widths, "tanh", new_rng(0))
        for name, p in net.params().items():
            stored = arrays[f"m{i}.{name}"]
            if stored.shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for m{i}.{name}")
            p.data[...] = stored
        members.append(net)
    return DeepEnsemble(members=members, member_seeds=seeds)
