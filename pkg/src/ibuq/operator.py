"""IB-UQ operator learning: a DeepONet decoder with a bottleneck branch.

The branch net consumes a latent code of the input-function sensors (not the
sensors themselves); the trunk net consumes a query location (x, t). Their
feature vectors combine by per-channel dot products into (mu, log sigma), a
Gaussian predictive density at that location, treated as independent across
locations within one function. The encoder sees only sensor values, so the
same latent draw serves every query point, and uncertainty about the input
function propagates to the whole predicted field.

Training mirrors the regression trainer: fit a GIN on standardized sensors,
then ascend the bottleneck objective with Adam, resampling a fresh subset of
query points per function every iteration. No mixup here.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, constant, gaussian_log_prob
from .checkpoint import load_checkpoint, save_checkpoint
from .datagen.grf import GRFConfig, GRFSampler
from .datagen.pde import NewtonError, PDEConfig, solve_diffusion_reaction
from .datagen.pipeline import OperatorDataset
from .flows import FlowFitConfig, GINModel, RealNVPFlow, gin_fit, gin_sample
from .ibcore import Encoder, encode_sample
from .nets import DenseNet
from .optim import AdamState, LRSchedule, adam_step
from .regression import METRIC_COLUMNS, TrainingError
from .seeding import child_seeds, new_rng

__all__ = [
    "DeepONetHead", "OperatorSample", "OperatorBatch", "IBONetModel",
    "OperatorConfig", "onet_eval", "ibonet_loss", "train_operator",
    "predict_field", "rmse_by_length", "save_operator_model",
    "load_operator_model", "RMSE_COLUMNS", "METRIC_COLUMNS",
]


class DeepONetHead:
    """Branch/trunk pair combined by per-channel dot products.

    Both nets emit 2*n_features values: the first n_features feed the mean
    channel, the rest the log-sigma channel.
    """

    def __init__(self, branch_net: DenseNet, trunk_net: DenseNet, n_features: int):
        for name, net in (("branch", branch_net), ("trunk", trunk_net)):
            if net.layer_widths[-1] != 2 * n_features:
                raise ValueError(f"{name} net must emit {2 * n_features} features, "
                                 f"got {net.layer_widths[-1]}")
        self.branch_net = branch_net
        self.trunk_net = trunk_net
        self.n_features = n_features

    def params(self, prefix: str = "") -> dict[str, Tensor]:
        out = self.branch_net.params(prefix + "branch.")
        out.update(self.trunk_net.params(prefix + "trunk."))
        return out


def onet_eval(head: DeepONetHead, z, query_points):
    """Evaluate the head: returns (mu, log sigma) per query point.

    Shapes: a single latent (d_z,) with queries (M, d) gives (M,) outputs; a
    batch (B, d_z) with shared queries (M, d) gives (B, M); a batch with
    per-sample queries (B, M, d) also gives (B, M). The branch net runs once
    per call regardless of the number of query points.
    """
    zt = z if isinstance(z, Tensor) else constant(z)
    qt = query_points if isinstance(query_points, Tensor) else constant(query_points)
    n = head.n_features
    if zt.ndim == 1:
        b = head.branch_net(zt.reshape(1, -1))
        t = head.trunk_net(qt)
        mu = (t[:, :n] * b[:, :n]).sum(axis=1)
        log_sigma = (t[:, n:] * b[:, n:]).sum(axis=1)
        return mu, log_sigma
    b = head.branch_net(zt)
    if qt.ndim == 2:
        t = head.trunk_net(qt)
        return b[:, :n] @ t[:, :n].transpose(), b[:, n:] @ t[:, n:].transpose()
    n_batch, n_q, d_q = qt.shape
    t = head.trunk_net(qt.reshape(n_batch * n_q, d_q)).reshape(n_batch, n_q, 2 * n)
    mu = (t[:, :, :n] * b[:, :n].reshape(n_batch, 1, n)).sum(axis=2)
    log_sigma = (t[:, :, n:] * b[:, n:].reshape(n_batch, 1, n)).sum(axis=2)
    return mu, log_sigma


@dataclass
class OperatorSample:
    """One input function with observed solution values at query points."""
    u_sensors: np.ndarray      # (m,)
    query_points: np.ndarray   # (M, d_query)
    s_values: np.ndarray       # (M,)
    provenance_seed: int = -1


@dataclass
class OperatorBatch:
    """Stacked OperatorSamples; all samples share the query count M."""
    u_sensors: np.ndarray      # (B, m)
    query_points: np.ndarray   # (B, M, d_query)
    s_values: np.ndarray       # (B, M)

    def __post_init__(self):
        b, m_q = self.s_values.shape
        if self.u_sensors.shape[0] != b or self.query_points.shape[:2] != (b, m_q):
            raise ValueError("inconsistent batch shapes")

    def __len__(self) -> int:
        return len(self.u_sensors)

    @classmethod
    def from_samples(cls, samples) -> "OperatorBatch":
        samples = list(samples)
        if not samples:
            raise ValueError("batch must be nonempty")
        counts = {len(s.s_values) for s in samples}
        if len(counts) != 1:
            raise ValueError(f"samples disagree on query count: {sorted(counts)}")
        return cls(np.stack([np.asarray(s.u_sensors, dtype=np.float64) for s in samples]),
                   np.stack([np.asarray(s.query_points, dtype=np.float64) for s in samples]),
                   np.stack([np.asarray(s.s_values, dtype=np.float64) for s in samples]))


@dataclass
class OperatorConfig:
    d_z: int = 64
    beta: float = 0.3
    tau: float = 1.4
    batch_size: int = 256
    iterations: int = 600
    schedule: LRSchedule = field(default_factory=lambda: LRSchedule(1e-3, 0.1, 200))
    gin_fit: FlowFitConfig = field(default_factory=lambda: FlowFitConfig(
        iterations=100, schedule=LRSchedule(1e-3, 1.0, 100)))
    net_hidden: tuple = (128, 128, 128)
    n_features: int = 128
    n_queries: int = 100
    flow_layers: int = 6
    flow_hidden: int = 256
    eps_gate: float = 1e-3
    sigma_floor: float = 1e-4
    seed: int = 0


class IBONetModel:
    """Encoder over sensors + DeepONet head + latent marginal + sensor GIN."""

    def __init__(self, encoder: Encoder, head: DeepONetHead, marginal: RealNVPFlow,
                 gin: GINModel, config: OperatorConfig,
                 sensor_mean: np.ndarray, sensor_std: np.ndarray,
                 sensor_grid: np.ndarray | None = None,
                 t_grid: np.ndarray | None = None):
        if marginal.dim != encoder.d_z:
            raise ValueError("marginal flow dimension must equal d_z")
        self.encoder = encoder
        self.head = head
        self.marginal = marginal
        self.gin = gin
        self.config = config
        self.sensor_mean = np.asarray(sensor_mean, dtype=np.float64)
        self.sensor_std = np.asarray(sensor_std, dtype=np.float64)
        self.sensor_grid = None if sensor_grid is None else np.asarray(sensor_grid)
        self.t_grid = None if t_grid is None else np.asarray(t_grid)

    @property
    def beta(self) -> float:
        return self.config.beta

    @property
    def tau(self) -> float:
        return self.config.tau

    @property
    def sigma_floor(self) -> float:
        return self.config.sigma_floor

    def standardize(self, u: np.ndarray) -> np.ndarray:
        return (np.asarray(u, dtype=np.float64) - self.sensor_mean) / self.sensor_std

    def query_grid(self) -> np.ndarray:
        if self.sensor_grid is None or self.t_grid is None:
            raise ValueError("model carries no solution grid")
        xx, tt = np.meshgrid(self.sensor_grid, self.t_grid, indexing="ij")
        return np.column_stack([xx.ravel(), tt.ravel()])

    def train_params(self) -> dict[str, Tensor]:
        # the GIN is fit once up front and stays frozen
        out = self.encoder.params("enc.")
        out.update(self.head.params("head."))
        out.update(self.marginal.params("marg."))
        return out

    def params(self) -> dict[str, Tensor]:
        out = self.train_params()
        out.update(self.gin.params("gin."))
        return out

    def predict_field(self, u_sensors, query_grid=None, n_samples: int = 128,
                      rng: np.random.Generator | None = None):
        return predict_field(self, u_sensors, query_grid, n_samples, rng)


def _check_rows(t: Tensor, term: str) -> None:
    bad = np.flatnonzero(~np.isfinite(np.atleast_1d(t.data)))
    if bad.size:
        raise FloatingPointError(f"{term} is not finite at sample {int(bad[0])}")


def ibonet_loss(model: IBONetModel, batch, wide_sensors: np.ndarray,
                rng: np.random.Generator):
    """Mean per-function decoder log-likelihood minus beta times compression.

    `batch` is an OperatorBatch (or a sequence of OperatorSample) whose sensor
    values live in the model's standardized space, as do the wide draws.
    The decoder term sums Gaussian log-densities over each function's M query
    points. Returns (objective Tensor, iyz float, izx float); maximized.
    """
    if isinstance(batch, (list, tuple)):
        batch = OperatorBatch.from_samples(batch)
    wide = np.asarray(wide_sensors, dtype=np.float64)
    if len(batch) == 0 or len(wide) == 0:
        raise ValueError("batches must be nonempty")

    z, _ = encode_sample(model.encoder, batch.u_sensors, rng)
    mu, log_sigma = onet_eval(model.head, z, batch.query_points)
    sigma = log_sigma.clip_min(float(np.log(model.sigma_floor))).exp()
    dec_ll = gaussian_log_prob(constant(batch.s_values), mu, sigma)
    _check_rows(dec_ll, "decoder log-likelihood")
    iyz = dec_ll.mean()

    t = constant(wide)
    gate = model.encoder.gate(t)
    mean = gate * model.encoder.zbar_net(t)
    z0 = rng.standard_normal((len(wide), model.encoder.d_z))
    zw = mean + (1.0 - gate) * constant(z0)
    enc_ll = gaussian_log_prob(zw, mean, 1.0 - gate)
    _check_rows(enc_ll, "encoder log-density")
    marg_ll = model.marginal.log_prob(zw)
    _check_rows(marg_ll, "marginal log-density")
    izx = (enc_ll - marg_ll).mean()

    iyz_val, izx_val = float(iyz.data), float(izx.data)
    objective = iyz if model.beta == 0.0 else iyz - izx.times(model.beta)
    return objective, iyz_val, izx_val


def build_operator_model(m_sensors: int, d_query: int, cfg: OperatorConfig,
                         rng: np.random.Generator):
    hidden = list(cfg.net_hidden)
    enc = Encoder(DenseNet([m_sensors] + hidden + [cfg.d_z], "tanh", rng),
                  DenseNet([m_sensors] + hidden + [cfg.d_z], "tanh", rng),
                  eps_gate=cfg.eps_gate)
    head = DeepONetHead(DenseNet([cfg.d_z] + hidden + [2 * cfg.n_features], "tanh", rng),
                        DenseNet([d_query] + hidden + [2 * cfg.n_features], "tanh", rng),
                        cfg.n_features)
    marginal = RealNVPFlow(cfg.d_z, n_layers=cfg.flow_layers, hidden=cfg.flow_hidden, rng=rng)
    gin = GINModel(m_sensors, n_layers=cfg.flow_layers, hidden=cfg.flow_hidden, rng=rng)
    return enc, head, marginal, gin


def train_operator(dataset: OperatorDataset, cfg: OperatorConfig | None = None):
    """Train an IB-UQ operator model; returns (model, metrics array).

    Metrics columns are METRIC_COLUMNS, one row per iteration. Every
    iteration draws a function batch and, for each function, a fresh subset
    of n_queries points from the full solution grid.
    """
    cfg = cfg or OperatorConfig()
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 function pairs")
    grid = dataset.query_grid()
    fields = dataset.fields.reshape(n, -1)

    seed_init, seed_gin, seed_batch, seed_query, seed_noise = child_seeds(cfg.seed, 5)
    rng_init = new_rng(seed_init)
    rng_batch = new_rng(seed_batch)
    rng_query = new_rng(seed_query)
    rng_noise = new_rng(seed_noise)

    u = dataset.u_sensors
    u_mean = u.mean(axis=0)
    u_std = u.std(axis=0)
    u_std = np.where(u_std > 0.0, u_std, 1.0)
    us = (u - u_mean) / u_std

    enc, head, marginal, gin = build_operator_model(u.shape[1], grid.shape[1], cfg, rng_init)
    gin_fit(gin, us, replace(cfg.gin_fit, seed=seed_gin))
    model = IBONetModel(enc, head, marginal, gin, cfg, u_mean, u_std,
                        sensor_grid=dataset.sensor_grid, t_grid=dataset.t_grid)

    params = model.train_params()
    state = AdamState()
    trace: list[tuple] = []
    n_grid = len(grid)
    m_q = min(cfg.n_queries, n_grid)
    batch = min(cfg.batch_size, n)
    replace_draw = n < cfg.batch_size
    for it in range(cfg.iterations):
        idx = rng_batch.choice(n, size=cfg.batch_size if replace_draw else batch,
                               replace=replace_draw)
        # per-function without-replacement subset: the m_q smallest of a row
        # of iid uniforms index a uniformly random m_q-subset of the grid
        q_idx = np.argpartition(rng_query.random((len(idx), n_grid)),
                                m_q - 1, axis=1)[:, :m_q]
        ob = OperatorBatch(us[idx], grid[q_idx], fields[idx[:, None], q_idx])
        wide = gin_sample(gin, cfg.batch_size, cfg.tau, rng_noise)
        lr = cfg.schedule.lr_at(it)
        try:
            objective, iyz, izx = ibonet_loss(model, ob, wide, rng_noise)
        except FloatingPointError as err:
            raise TrainingError(f"aborted at iteration {it}: {err}", trace) from err
        for p in params.values():
            p.grad = None
        objective.times(-1.0).backward()
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                 for k, p in params.items()}
        adam_step(params, grads, state, lr)
        trace.append((it, float(objective.data), iyz, izx, lr))
    return model, np.array(trace, dtype=np.float64)


def _trunk_features(model: IBONetModel, query_grid: np.ndarray) -> np.ndarray:
    return model.head.trunk_net(constant(np.asarray(query_grid, dtype=np.float64))).data


def _field_stats(model: IBONetModel, u_sensors, t_feats: np.ndarray,
                 n_samples: int, rng: np.random.Generator):
    """Monte Carlo field statistics with precomputed trunk features."""
    u = np.asarray(u_sensors, dtype=np.float64).reshape(1, -1)
    ut = constant(model.standardize(u))
    gate = model.encoder.gate(ut).data
    zbar = model.encoder.zbar_net(ut).data
    z = gate * zbar + (1.0 - gate) * rng.standard_normal((n_samples, model.encoder.d_z))
    b = model.head.branch_net(constant(z)).data
    n = model.head.n_features
    mu = b[:, :n] @ t_feats[:, :n].T
    sigma = np.exp(np.maximum(b[:, n:] @ t_feats[:, n:].T, np.log(model.sigma_floor)))
    mean = mu.mean(axis=0)
    total_var = (sigma ** 2).mean(axis=0) + mu.var(axis=0)
    return mean, np.sqrt(total_var), float(gate.mean())


def predict_field(model: IBONetModel, u_sensors, query_grid=None,
                  n_samples: int = 128, rng: np.random.Generator | None = None):
    """Predictive (mean, std, gate summary) for one input function.

    The trunk runs once over the grid and the branch once over all latent
    draws; per-point variance is mean decoder variance plus variance of the
    decoder means. query_grid defaults to the model's own solution grid.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng or new_rng(0)
    if query_grid is None:
        query_grid = model.query_grid()
    return _field_stats(model, u_sensors, _trunk_features(model, query_grid),
                        n_samples, rng)


RMSE_COLUMNS = ("l", "rmse", "std", "n_failed")


def rmse_by_length(model: IBONetModel, lengths, n_inputs: int = 100,
                   rng: np.random.Generator | None = None, noise_std: float = 0.01,
                   n_samples: int = 64, pde: PDEConfig | None = None,
                   workers: int | None = None) -> np.ndarray:
    """Mean field RMSE and predicted std per GRF correlation length.

    For each length draws n_inputs fresh source functions, solves the PDE,
    contaminates both sensors and field with observation noise, and scores
    the predictive mean against the noisy field. Inputs fan out over worker
    threads, each with its own child rng, so results are identical for any
    worker count. Solver failures are excluded and counted in the last
    column (RMSE_COLUMNS ordering).
    """
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    rng = rng or new_rng(0)
    pde = pde or PDEConfig()
    if model.sensor_grid is None or len(model.sensor_grid) != pde.nx:
        raise ValueError("model sensor grid does not match the PDE configuration")
    if workers is None:
        workers = min(4, os.cpu_count() or 1)
    t_feats = _trunk_features(model, model.query_grid())
    root = int(rng.integers(0, 2 ** 63 - 1))

    def score_one(length: float, sampler: GRFSampler, li: int, i: int):
        r = np.random.Generator(np.random.PCG64(np.random.SeedSequence([root, li, i])))
        u = sampler.sample(r, 1)[0]
        try:
            s = solve_diffusion_reaction(u, pde)
        except (NewtonError, np.linalg.LinAlgError):
            return None
        s_obs = (s + r.normal(0.0, noise_std, size=s.shape)).ravel()
        u_obs = u + r.normal(0.0, noise_std, size=u.shape)
        mean, std, _ = _field_stats(model, u_obs, t_feats, n_samples, r)
        return float(np.sqrt(np.mean((mean - s_obs) ** 2))), float(std.mean())

    rows = []
    for li, length in enumerate(lengths):
        sampler = GRFSampler(GRFConfig(l=float(length), grid=np.asarray(model.sensor_grid)))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda i: score_one(float(length), sampler, li, i),
                                        range(n_inputs)))
        else:
            results = [score_one(float(length), sampler, li, i) for i in range(n_inputs)]
        ok = [r for r in results if r is not None]
        n_failed = n_inputs - len(ok)
        if ok:
            arr = np.array(ok)
            rows.append([float(length), arr[:, 0].mean(), arr[:, 1].mean(), n_failed])
        else:
            rows.append([float(length), np.nan, np.nan, n_failed])
    return np.array(rows, dtype=np.float64)


def save_operator_model(path: str, model: IBONetModel) -> None:
    cfg = model.config
    manifest = {
        "kind": "ibuq-operator",
        "m_sensors": model.encoder.m_net.layer_widths[0],
        "d_query": model.head.trunk_net.layer_widths[0],
        "d_z": cfg.d_z, "beta": cfg.beta, "tau": cfg.tau,
        "n_features": cfg.n_features,
        "net_hidden": ",".join(str(w) for w in cfg.net_hidden),
        "flow_layers": cfg.flow_layers, "flow_hidden": cfg.flow_hidden,
        "eps_gate": cfg.eps_gate, "sigma_floor": cfg.sigma_floor,
        "has_grid": int(model.sensor_grid is not None),
    }
    arrays = {k: v.data for k, v in model.params().items()}
    arrays["aux.sensor_mean"] = model.sensor_mean
    arrays["aux.sensor_std"] = model.sensor_std
    arrays["aux.gin_shift"] = model.gin.data_shift
    if model.sensor_grid is not None:
        arrays["aux.sensor_grid"] = model.sensor_grid
        arrays["aux.t_grid"] = model.t_grid
    save_checkpoint(path, manifest, arrays)


def load_operator_model(path: str) -> IBONetModel:
    manifest, arrays = load_checkpoint(path)
    if manifest.get("kind") != "ibuq-operator":
        raise ValueError(f"{path} is not an operator model checkpoint")
    cfg = OperatorConfig(
        d_z=int(manifest["d_z"]), beta=float(manifest["beta"]),
        tau=float(manifest["tau"]), n_features=int(manifest["n_features"]),
        net_hidden=tuple(int(w) for w in manifest["net_hidden"].split(",")),
        flow_layers=int(manifest["flow_layers"]),
        flow_hidden=int(manifest["flow_hidden"]),
        eps_gate=float(manifest["eps_gate"]),
        sigma_floor=float(manifest["sigma_floor"]))
    enc, head, marginal, gin = build_operator_model(
        int(manifest["m_sensors"]), int(manifest["d_query"]), cfg, new_rng(0))
    if "aux.gin_shift" in arrays:
        gin.data_shift[...] = arrays["aux.gin_shift"]
    grid = arrays.get("aux.sensor_grid") if int(manifest.get("has_grid", 0)) else None
    model = IBONetModel(enc, head, marginal, gin, cfg,
                        arrays["aux.sensor_mean"], arrays["aux.sensor_std"],
                        sensor_grid=grid,
                        t_grid=arrays.get("aux.t_grid") if grid is not None else None)
    for name, p in model.params().items():
        if name not in arrays:
            raise ValueError(f"checkpoint is missing parameter {name}")
        if arrays[name].shape != p.data.shape:
            raise ValueError(f"checkpoint shape mismatch for {name}")
        p.data[...] = arrays[name]
    return model
