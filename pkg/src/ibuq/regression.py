"""End-to-end IB-UQ function regression.

Training: fit a tempered input model (GIN) on the standardized inputs, then
ascend the IB objective with Adam. Each iteration draws a training batch
(optionally mixup-augmented), draws a wide batch from the GIN at temperature
tau, and evaluates prediction and compression terms at one latent sample per
datum. Prediction: S latent draws per input; the predictive variance is the
mean decoder variance plus the variance of the decoder means (law of total
variance).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import constant
from .checkpoint import load_checkpoint, save_checkpoint
from .flows import FlowFitConfig, GINModel, RealNVPFlow, gin_fit, gin_sample
from .ibcore import (Encoder, GaussianDecoder, IBModel, MixupConfig, ib_loss,
                     mixup_batch)
from .nets import DenseNet
from .optim import AdamState, LRSchedule, adam_step
from .seeding import child_seeds, new_rng

METRIC_COLUMNS = ("iteration", "objective", "iyz", "izx", "lr")


class TrainingError(RuntimeError):
    """Raised when training aborts; carries the metrics collected so far."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass
class RegressionConfig:
    d_z: int = 20
    beta: float = 0.3
    tau: float = 16.0
    batch_size: int = 256
    iterations: int = 5000
    schedule: LRSchedule = field(default_factory=lambda: LRSchedule(1e-3, 0.1, 1000))
    mixup: MixupConfig = field(default_factory=MixupConfig)
    gin_fit: FlowFitConfig = field(default_factory=FlowFitConfig)
    net_hidden: tuple = (32, 32)
    flow_layers: int = 6
    flow_hidden: int = 256
    eps_gate: float = 1e-3
    sigma_floor: float = 1e-4
    seed: int = 0


@dataclass
class PredictiveDistribution:
    mean: np.ndarray
    std: np.ndarray
    gate: np.ndarray
    n_samples: int


class RegressionModel:
    def __init__(self, ib: IBModel, gin: GINModel, config: RegressionConfig,
                 x_mean: np.ndarray, x_std: np.ndarray):
        self.ib = ib
        self.gin = gin
        self.config = config
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.asarray(x_std, dtype=np.float64)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.x_mean) / self.x_std

    def predict(self, x: np.ndarray, n_samples: int = 128,
                rng: np.random.Generator | None = None) -> PredictiveDistribution:
        return predict(self, x, n_samples, rng)

    def params(self):
        out = self.ib.params()
        out.update(self.gin.params("gin."))
        return out


def _as_xy(x, y=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y is None:
        return x
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    return x, y


def build_model(d_x: int, d_y: int, cfg: RegressionConfig,
                rng: np.random.Generator) -> tuple[IBModel, GINModel]:
    hidden = list(cfg.net_hidden)
    enc = Encoder(DenseNet([d_x] + hidden + [cfg.d_z], "tanh", rng),
                  DenseNet([d_x] + hidden + [cfg.d_z], "tanh", rng),
                  eps_gate=cfg.eps_gate)
    dec = GaussianDecoder(DenseNet([cfg.d_z] + hidden + [2 * d_y], "tanh", rng),
                          sigma_floor=cfg.sigma_floor)
    marginal = RealNVPFlow(cfg.d_z, n_layers=cfg.flow_layers, hidden=cfg.flow_hidden, rng=rng)
    gin = GINModel(d_x, n_layers=cfg.flow_layers, hidden=cfg.flow_hidden, rng=rng)
    return IBModel(enc, dec, marginal, cfg.beta), gin


def train_regression(x: np.ndarray, y: np.ndarray,
                     cfg: RegressionConfig | None = None):
    """Train an IB-UQ regressor; returns (model, metrics array).

    Metrics columns are METRIC_COLUMNS, one row per iteration.
    """
    cfg = cfg or RegressionConfig()
    x, y = _as_xy(x, y)
    n = len(x)
    if n < 2 or len(y) != n:
        raise ValueError(f"need at least 2 (x, y) pairs with equal lengths, got {n}/{len(y)}")

    seed_init, seed_gin, seed_batch, seed_mix, seed_noise = child_seeds(cfg.seed, 5)
    rng_init = new_rng(seed_init)
    rng_batch = new_rng(seed_batch)
    rng_mix = new_rng(seed_mix)
    rng_noise = new_rng(seed_noise)

    x_mean = x.mean(axis=0)
    x_std = x.std(axis=0)
    x_std = np.where(x_std > 0.0, x_std, 1.0)
    xs = (x - x_mean) / x_std

    ib, gin = build_model(x.shape[1], y.shape[1], cfg, rng_init)
    gin_fit(gin, xs, replace(cfg.gin_fit, seed=seed_gin))

    params = ib.params()
    state = AdamState()
    trace: list[tuple] = []
    batch = min(cfg.batch_size, n) if cfg.batch_size else n
    replace_draw = n < cfg.batch_size
    for it in range(cfg.iterations):
        idx = rng_batch.choice(n, size=cfg.batch_size if replace_draw else batch,
                               replace=replace_draw)
        xb, yb = mixup_batch(x[idx], y[idx], cfg.mixup, rng_mix)
        xb = (xb - x_mean) / x_std
        wide = gin_sample(gin, cfg.batch_size, cfg.tau, rng_noise)
        lr = cfg.schedule.lr_at(it)
        try:
            objective, iyz, izx = ib_loss(ib, xb, yb, wide, rng_noise)
        except FloatingPointError as err:
            raise TrainingError(f"aborted at iteration {it}: {err}", trace) from err
        for p in params.values():
            p.grad = None
        objective.times(-1.0).backward()
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                 for k, p in params.items()}
        adam_step(params, grads, state, lr)
        trace.append((it, float(objective.data), iyz, izx, lr))

    model = RegressionModel(ib, gin, cfg, x_mean, x_std)
    return model, np.array(trace, dtype=np.float64)


def predict(model: RegressionModel, x: np.ndarray, n_samples: int = 128,
            rng: np.random.Generator | None = None) -> PredictiveDistribution:
    """Monte Carlo predictive distribution from n_samples latent draws."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng or new_rng(0)
    x = _as_xy(x)
    xs = constant(model.standardize(x))
    enc = model.ib.encoder
    m = enc.gate(xs).data
    zbar = enc.zbar_net(xs).data
    n, d_z = zbar.shape
    z0 = rng.standard_normal((n_samples, n, d_z))
    z = m * zbar + (1.0 - m) * z0
    mu, sigma = model.ib.decoder.forward(constant(z.reshape(n_samples * n, d_z)))
    d_y = model.ib.decoder.d_y
    mu = mu.data.reshape(n_samples, n, d_y)
    sigma = sigma.data.reshape(n_samples, n, d_y)
    mean = mu.mean(axis=0)
    total_var = (sigma ** 2).mean(axis=0) + mu.var(axis=0)
    return PredictiveDistribution(mean=mean, std=np.sqrt(total_var), gate=m,
                                  n_samples=n_samples)


def rl2e(pred_means: np.ndarray, targets: np.ndarray) -> float:
    """Relative L2 error of the predictive mean."""
    p = np.asarray(pred_means, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError("prediction/target length mismatch")
    denom = float(np.sum(t * t))
    if denom == 0.0:
        raise ValueError("targets are all zero; relative L2 error is undefined")
    return float(np.sqrt(np.sum((p - t) ** 2) / denom))


SWEEP_COLUMNS = ("beta", "seed", "objective", "iyz", "izx", "selected")


def _sweep_run(task):
    """One (beta, seed) sweep entry; top-level so worker processes can run it."""
    x, y, beta, beta_idx, seed_idx, base_cfg, tail = task
    run_seed = int(np.random.SeedSequence([base_cfg.seed, beta_idx, seed_idx]).generate_state(1)[0])
    cfg = replace(base_cfg, beta=float(beta), seed=run_seed)
    try:
        _, metrics = train_regression(x, y, cfg)
    except TrainingError as err:
        nan = float("nan")
        return [float(beta), seed_idx, nan, nan, nan, 0.0], str(err)
    window = metrics[-tail:]
    return [float(beta), seed_idx, float(window[:, 1].mean()),
            float(window[:, 2].mean()), float(window[:, 3].mean()), 0.0], None


def info_plane_sweep(x: np.ndarray, y: np.ndarray, betas, n_seeds: int,
                     base_cfg: RegressionConfig | None = None, tail: int = 50,
                     workers: int = 1):
    """Train n_seeds models per beta and mark the best run of each.

    Final objective/IYZ/IXZ are means over the last `tail` logged iterations
    (the learning rate has decayed to ~0 there, so the tail is a Monte Carlo
    average of a stationary estimator). Diverged runs warn with their (beta,
    seed), are recorded with NaN metrics, and are never selected. Entries are
    independent, so workers > 1 fans them out over processes; every run seed
    is index-derived, making results identical for any worker count.
    Returns rows of SWEEP_COLUMNS.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    base_cfg = base_cfg or RegressionConfig()
    tasks = [(x, y, float(beta), bi, si, base_cfg, tail)
             for bi, beta in enumerate(betas) for si in range(n_seeds)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_run, tasks))
    else:
        results = [_sweep_run(t) for t in tasks]
    rows = []
    for (row, err), task in zip(results, tasks):
        if err is not None:
            warnings.warn(f"sweep run (beta={task[2]:g}, seed index {task[4]}) failed: {err}")
        rows.append(row)
    for start in range(0, len(rows), n_seeds):
        group = range(start, start + n_seeds)
        finite = [i for i in group if np.isfinite(rows[i][2])]
        if finite:
            best = max(finite, key=lambda i: rows[i][2])
            rows[best][5] = 1.0
    return np.array(rows, dtype=np.float64)


def save_regression_model(path: str, model: RegressionModel) -> None:
    cfg = model.config
    manifest = {
        "kind": "ibuq-regression",
        "d_x": model.ib.encoder.m_net.layer_widths[0],
        "d_y": model.ib.decoder.d_y,
        "d_z": cfg.d_z, "beta": cfg.beta, "tau": cfg.tau,
        "net_hidden": ",".join(str(w) for w in cfg.net_hidden),
        "flow_layers": cfg.flow_layers, "flow_hidden": cfg.flow_hidden,
        "eps_gate": cfg.eps_gate, "sigma_floor": cfg.sigma_floor,
    }
    arrays = {k: v.data for k, v in model.params().items()}
    arrays["aux.x_mean"] = model.x_mean
    arrays["aux.x_std"] = model.x_std
    arrays["aux.gin_shift"] = model.gin.data_shift
    save_checkpoint(path, manifest, arrays)


def load_regression_model(path: str) -> RegressionModel:
    manifest, arrays = load_checkpoint(path)
    if manifest.get("kind") != "ibuq-regression":
        raise ValueError(f"{path} is not a regression model checkpoint")
    cfg = RegressionConfig(
        d_z=int(manifest["d_z"]), beta=float(manifest["beta"]),
        tau=float(manifest["tau"]),
        net_hidden=tuple(int(w) for w in manifest["net_hidden"].split(",")),
        flow_layers=int(manifest["flow_layers"]),
        flow_hidden=int(manifest["flow_hidden"]),
        eps_gate=float(manifest["eps_gate"]),
        sigma_floor=float(manifest["sigma_floor"]))
    ib, gin = build_model(int(manifest["d_x"]), int(manifest["d_y"]), cfg, new_rng(0))
    if "aux.gin_shift" in arrays:
        gin.data_shift[...] = arrays["aux.gin_shift"]
    model = RegressionModel(ib, gin, cfg, arrays["aux.x_mean"], arrays["aux.x_std"])
    for name, p in model.params().items():
        if name not in arrays:
            raise ValueError(f"checkpoint is missing parameter {name}")
        if arrays[name].shape != p.data.shape:
            raise ValueError(f"checkpoint shape mismatch for {name}")
        p.data[...] = arrays[name]
    return model
