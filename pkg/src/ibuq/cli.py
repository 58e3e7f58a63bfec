"""Command-line surface: data generation, training, evaluation, sweeps, plots.

Every run command resolves its options as defaults < config file < explicit
flags, then writes the resolved set to <out>/config.txt so the run can be
replayed bit-for-bit from its artifacts alone. Exit codes: 0 success, 2 usage
error (bad flags, unknown keys, missing inputs), 1 runtime failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .baselines import (EnsembleConfig, ensemble_predict, load_ensemble,
                        save_ensemble, train_deep_ensemble)
from .datagen import (ID_INTERVALS, OOD_INTERVALS, build_operator_dataset,
                      default_csv_path, discontinuous_fn, fetch_housing,
                      load_housing_csv, load_operator_dataset, read_csv,
                      sample_discontinuous, save_operator_dataset,
                      split_housing, write_csv)
from .operator import (METRIC_COLUMNS as OP_METRIC_COLUMNS, OperatorConfig,
                       RMSE_COLUMNS, load_operator_model, predict_field,
                       rmse_by_length, save_operator_model, train_operator)
from .optim import LRSchedule
from .regression import (METRIC_COLUMNS, SWEEP_COLUMNS, MixupConfig,
                         RegressionConfig, TrainingError, info_plane_sweep,
                         load_regression_model, rl2e, save_regression_model,
                         train_regression)
from .seeding import new_rng

PRED_COLUMNS = ("x", "mean", "std", "gate")


class UsageError(ValueError):
    """Bad invocation: wrong flags, unknown config keys, missing inputs."""


class SchemaError(ValueError):
    """Input file exists but lacks a required column."""


# ---------------------------------------------------------------------------
# config plumbing


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    out: dict[str, str] = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def resolve_options(spec: dict, args: argparse.Namespace) -> dict:
    """Merge per-option defaults, the --config file, then explicit flags."""
    merged = {name: default for name, (_, default, _) in spec.items()}
    if getattr(args, "config", None):
        for key, raw in parse_config_file(args.config).items():
            if key not in spec:
                raise UsageError(f"unknown config key {key!r} "
                                 f"(expected one of: {', '.join(sorted(spec))})")
            caster = spec[key][0]
            try:
                merged[key] = caster(raw)
            except ValueError as err:
                raise UsageError(f"config key {key!r}: {err}") from err
    for name in spec:
        flag_val = getattr(args, name.replace("-", "_"), None)
        if flag_val is not None:
            merged[name] = flag_val
    return merged


def write_config(out_dir: str, command: str, opts: dict) -> None:
    path = os.path.join(out_dir, "config.txt")
    with open(path, "w") as fh:
        fh.write(f"# replay: ibuq {command} --config config.txt --out <dir>\n")
        for key in sorted(opts):
            value = opts[key]
            if isinstance(value, float):
                value = repr(value)
            fh.write(f"{key}={value}\n")


def add_option_flags(parser: argparse.ArgumentParser, spec: dict) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="flat key=value config file; flags override it")
    for name, (caster, default, help_text) in spec.items():
        parser.add_argument(f"--{name}", type=caster, default=None,
                            help=f"{help_text} (default {default})")


def ensure_out_dir(opts_or_path) -> str:
    path = opts_or_path if isinstance(opts_or_path, str) else opts_or_path["out"]
    if not path:
        raise UsageError("--out directory is required")
    os.makedirs(path, exist_ok=True)
    return path


def require_file(path: str, what: str) -> str:
    if not path:
        raise UsageError(f"--{what} is required")
    if not os.path.exists(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def parse_float_list(text: str) -> tuple:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as err:
        raise UsageError(f"expected comma-separated floats, got {text!r}") from err
    if not values:
        raise UsageError("expected at least one value")
    return values


def need_columns(header: list, needed: tuple, path: str) -> dict[str, int]:
    index = {}
    for col in needed:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r} "
                              f"(found: {', '.join(header)})")
        index[col] = header.index(col)
    return index


def load_xy_csv(path: str):
    header, data = read_csv(path)
    cols = need_columns(header, ("x", "y"), path)
    return data[:, [cols["x"]]], data[:, [cols["y"]]]


# ---------------------------------------------------------------------------
# gen-data

GEN_DISCONT_SPEC = {
    "n": (int, 32, "number of training pairs"),
    "noise": (float, 0.1, "label noise std"),
    "seed": (int, 0, "sampling seed"),
}

GEN_OPERATOR_SPEC = {
    "n": (int, 1000, "number of input/output function pairs"),
    "l": (float, 0.5, "GRF correlation length of the inputs"),
    "noise": (float, 0.01, "observation noise std on the solution field"),
    "seed": (int, 0, "sampling seed"),
}

GEN_HOUSING_SPEC = {
    "csv": (str, "", "housing CSV path (default: $IBUQ_HOUSING_CSV or data/)"),
    "k": (int, 20, "LOF neighborhood size"),
    "split-seed": (int, 0, "ID train/test shuffle seed"),
}


def cmd_gen_data(args) -> int:
    out = ensure_out_dir(args.out or "")
    if args.subtype == "discontinuous":
        opts = resolve_options(GEN_DISCONT_SPEC, args)
        if opts["n"] < 1:
            raise UsageError("--n must be >= 1")
        x, y = sample_discontinuous(opts["n"], opts["noise"], new_rng(opts["seed"]))
        write_csv(os.path.join(out, "data.csv"), ("x", "y"), np.hstack([x, y]))
        write_config(out, "gen-data discontinuous", opts)
        print(f"wrote {len(x)} pairs to {out}/data.csv "
              f"(x in [{x.min():.3f}, {x.max():.3f}], noise {opts['noise']:g})")
    elif args.subtype == "operator":
        opts = resolve_options(GEN_OPERATOR_SPEC, args)
        if opts["n"] < 1:
            raise UsageError("--n must be >= 1")
        ds = build_operator_dataset(opts["n"], opts["l"], opts["noise"],
                                    new_rng(opts["seed"]))
        save_operator_dataset(os.path.join(out, "dataset"), ds)
        write_config(out, "gen-data operator", opts)
        print(f"wrote {len(ds)} function pairs to {out}/dataset "
              f"(l={opts['l']:g}, field rms {np.sqrt((ds.fields ** 2).mean()):.4f})")
    else:
        opts = resolve_options(GEN_HOUSING_SPEC, args)
        csv_path = require_file(opts["csv"] or default_csv_path(), "csv")
        table = load_housing_csv(csv_path)
        split = split_housing(table, k=opts["k"], split_seed=opts["split-seed"])
        for name, idx in split.all_parts().items():
            write_csv(os.path.join(out, f"{name}.csv"), ("row",), idx[:, None])
        write_csv(os.path.join(out, "scores.csv"), ("row", "score"),
                  np.column_stack([np.arange(len(split.scores)), split.scores]))
        opts["csv"] = csv_path
        write_config(out, "gen-data housing-split", opts)
        sizes = {name: len(idx) for name, idx in split.all_parts().items()}
        print("band sizes: " + ", ".join(f"{k}={v}" for k, v in sizes.items()))
    return 0


# ---------------------------------------------------------------------------
# train

TRAIN_REG_SPEC = {
    "data": (str, "", "training CSV with x,y columns"),
    "eval-data": (str, "", "optional held-out CSV for a summary RL2E"),
    "seed": (int, 0, "master training seed"),
    "beta": (float, 0.3, "compression weight"),
    "tau": (float, 16.0, "wide-sampling temperature"),
    "d-z": (int, 20, "latent dimension"),
    "iterations": (int, 5000, "Adam iterations"),
    "batch-size": (int, 256, "batch size for both batches"),
    "lr": (float, 1e-3, "base learning rate"),
    "lr-decay": (float, 0.1, "staircase decay factor"),
    "lr-every": (int, 1000, "iterations between decays"),
    "mixup": (int, 1, "1 to enable mixup, 0 to disable"),
    "alpha": (float, 0.005, "mixup Beta(alpha, alpha) parameter"),
}

TRAIN_OP_SPEC = {
    "data": (str, "", "operator dataset directory from gen-data"),
    "seed": (int, 0, "master training seed"),
    "beta": (float, 0.3, "compression weight"),
    "tau": (float, 1.4, "wide-sampling temperature"),
    "d-z": (int, 64, "latent dimension"),
    "iterations": (int, 600, "Adam iterations"),
    "batch-size": (int, 256, "function batch size"),
    "n-queries": (int, 100, "query points per function per iteration"),
    "lr": (float, 1e-3, "base learning rate"),
    "lr-decay": (float, 0.1, "staircase decay factor"),
    "lr-every": (int, 200, "iterations between decays"),
}

TRAIN_ENS_SPEC = {
    "data": (str, "", "training CSV with x,y columns"),
    "eval-data": (str, "", "optional held-out CSV for a summary RL2E"),
    "seed": (int, 0, "master seed for member seeds"),
    "members": (int, 20, "ensemble size"),
    "train-steps": (int, 2000, "Adam steps per member"),
    "weight-decay": (float, 4e-6, "L2 penalty on weights"),
    "lr": (float, 1e-3, "Adam learning rate"),
    "workers": (int, 1, "parallel member training threads"),
}


def _summary_rl2e(path: str, predict_mean) -> str:
    if not path:
        return ""
    x_eval, y_eval = load_xy_csv(require_file(path, "eval-data"))
    return f" heldout RL2E={rl2e(predict_mean(x_eval), y_eval):.6f}"


def cmd_train(args) -> int:
    out = ensure_out_dir(args.out or "")
    if args.mode == "ibuq-regression":
        opts = resolve_options(TRAIN_REG_SPEC, args)
        x, y = load_xy_csv(require_file(opts["data"], "data"))
        cfg = RegressionConfig(
            d_z=opts["d-z"], beta=opts["beta"], tau=opts["tau"],
            batch_size=opts["batch-size"], iterations=opts["iterations"],
            schedule=LRSchedule(opts["lr"], opts["lr-decay"], opts["lr-every"]),
            mixup=MixupConfig(enabled=bool(opts["mixup"]), alpha=opts["alpha"]),
            seed=opts["seed"])
        write_config(out, "train ibuq-regression", opts)
        try:
            model, metrics = train_regression(x, y, cfg)
        except TrainingError as err:
            write_csv(os.path.join(out, "metrics.csv"), METRIC_COLUMNS,
                      np.array(err.trace, dtype=np.float64).reshape(-1, len(METRIC_COLUMNS)))
            raise
        write_csv(os.path.join(out, "metrics.csv"), METRIC_COLUMNS, metrics)
        save_regression_model(os.path.join(out, "model"), model)
        extra = _summary_rl2e(opts["eval-data"],
                              lambda xe: model.predict(xe, rng=new_rng(0)).mean)
        print(f"trained ibuq-regression: final objective={metrics[-1, 1]:.6f} "
              f"iyz={metrics[-1, 2]:.6f} izx={metrics[-1, 3]:.6f}{extra}")
    elif args.mode == "ibuq-operator":
        opts = resolve_options(TRAIN_OP_SPEC, args)
        ds = load_operator_dataset(require_file(opts["data"], "data"))
        cfg = OperatorConfig(
            d_z=opts["d-z"], beta=opts["beta"], tau=opts["tau"],
            batch_size=opts["batch-size"], iterations=opts["iterations"],
            n_queries=opts["n-queries"],
            schedule=LRSchedule(opts["lr"], opts["lr-decay"], opts["lr-every"]),
            seed=opts["seed"])
        write_config(out, "train ibuq-operator", opts)
        try:
            model, metrics = train_operator(ds, cfg)
        except TrainingError as err:
            write_csv(os.path.join(out, "metrics.csv"), OP_METRIC_COLUMNS,
                      np.array(err.trace, dtype=np.float64).reshape(-1, len(OP_METRIC_COLUMNS)))
            raise
        write_csv(os.path.join(out, "metrics.csv"), OP_METRIC_COLUMNS, metrics)
        save_operator_model(os.path.join(out, "model"), model)
        print(f"trained ibuq-operator: final objective={metrics[-1, 1]:.6f} "
              f"iyz={metrics[-1, 2]:.6f} izx={metrics[-1, 3]:.6f}")
    else:
        opts = resolve_options(TRAIN_ENS_SPEC, args)
        x, y = load_xy_csv(require_file(opts["data"], "data"))
        cfg = EnsembleConfig(members=opts["members"], train_steps=opts["train-steps"],
                             weight_decay=opts["weight-decay"],
                             learning_rate=opts["lr"])
        write_config(out, "train ensemble", opts)
        ens = train_deep_ensemble(x, y, cfg, new_rng(opts["seed"]),
                                  workers=opts["workers"])
        save_ensemble(os.path.join(out, "model"), ens)
        write_csv(os.path.join(out, "metrics.csv"), ("member", "seed"),
                  np.column_stack([np.arange(len(ens.member_seeds)),
                                   np.asarray(ens.member_seeds, dtype=np.float64)]))
        mean_tr, _ = ensemble_predict(ens, x)
        extra = _summary_rl2e(opts["eval-data"],
                              lambda xe: ensemble_predict(ens, xe)[0])
        print(f"trained ensemble of {len(ens.members)}: "
              f"train RL2E={rl2e(mean_tr, y):.6f}{extra}")
    return 0


# ---------------------------------------------------------------------------
# eval

EVAL_TABLE1_SPEC = {
    "model": (str, "", "checkpoint dir; 'oracle' for the exact-truth stub"),
    "kind": (str, "ibuq", "model kind: ibuq or ensemble"),
    "grid-points": (int, 100, "evaluation points per interval"),
    "samples": (int, 128, "latent draws per prediction"),
    "seed": (int, 0, "prediction noise seed"),
}

EVAL_OPERATOR_SPEC = {
    "model": (str, "", "operator checkpoint dir"),
    "l-list": (str, "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
               "comma-separated GRF correlation lengths"),
    "n-inputs": (int, 100, "test functions per length"),
    "noise": (float, 0.01, "observation noise on test fields"),
    "samples": (int, 64, "latent draws per prediction"),
    "seed": (int, 0, "test-function seed"),
    "workers": (int, 0, "solver threads (0 = auto)"),
    "field-sample": (int, -1, "if >= 0, also emit field.csv for this test index"),
}

EVAL_HOUSING_SPEC = {
    "model": (str, "", "regression checkpoint dir"),
    "kind": (str, "ibuq", "model kind: ibuq or ensemble"),
    "csv": (str, "", "housing CSV path"),
    "split-dir": (str, "", "directory with gen-data housing-split indices"),
    "samples": (int, 128, "latent draws per prediction"),
    "seed": (int, 0, "prediction noise seed"),
}


def _interval_grid(intervals, per: int) -> np.ndarray:
    return np.concatenate([np.linspace(a, b, per) for a, b in intervals])[:, None]


def _load_predictor(path: str, kind: str, samples: int, seed: int):
    """Returns x -> (mean, std, gate) for either model family or the stub."""
    if path == "oracle":
        def oracle(x):
            truth = discontinuous_fn(x)
            return truth, np.zeros_like(truth), np.ones((len(x), 1))
        return oracle
    require_file(path, "model")
    if kind == "ensemble":
        ens = load_ensemble(path)

        def predict_ens(x):
            mean, std = ensemble_predict(ens, x)
            return mean, std, np.full((len(x), 1), np.nan)
        return predict_ens
    model = load_regression_model(path)

    def predict_ib(x):
        p = model.predict(x, n_samples=samples, rng=new_rng(seed))
        return p.mean, p.std, p.gate
    return predict_ib


def cmd_eval(args) -> int:
    out = ensure_out_dir(args.out or "")
    if args.mode == "table1":
        opts = resolve_options(EVAL_TABLE1_SPEC, args)
        predictor = _load_predictor(opts["model"], opts["kind"],
                                    opts["samples"], opts["seed"])
        report = []
        for region, intervals in (("id", ID_INTERVALS), ("ood", OOD_INTERVALS)):
            xg = _interval_grid(intervals, opts["grid-points"])
            truth = discontinuous_fn(xg)
            mean, std, gate = predictor(xg)
            write_csv(os.path.join(out, f"predictions_{region}.csv"), PRED_COLUMNS,
                      np.column_stack([xg, mean, std,
                                       gate.mean(axis=1, keepdims=True)]))
            report.append((region, rl2e(mean, truth), float(std.mean()),
                           float(gate.mean())))
            print(f"{region}: RL2E={report[-1][1]:.6f} mean std={report[-1][2]:.6f}")
        rows = np.array([[i, r[1], r[2], r[3]] for i, r in enumerate(report)])
        write_csv(os.path.join(out, "report.csv"),
                  ("region_ood", "rl2e", "mean_std", "mean_gate"), rows)
        write_config(out, "eval table1", opts)
    elif args.mode == "operator":
        opts = resolve_options(EVAL_OPERATOR_SPEC, args)
        model = load_operator_model(require_file(opts["model"], "model"))
        lengths = parse_float_list(opts["l-list"])
        workers = opts["workers"] if opts["workers"] > 0 else None
        rows = rmse_by_length(model, lengths, n_inputs=opts["n-inputs"],
                              rng=new_rng(opts["seed"]), noise_std=opts["noise"],
                              n_samples=opts["samples"], workers=workers)
        write_csv(os.path.join(out, "report.csv"), RMSE_COLUMNS, rows)
        for row in rows:
            print(f"l={row[0]:g}: rmse={row[1]:.6f} std={row[2]:.6f} "
                  f"failed={int(row[3])}")
        if opts["field-sample"] >= 0:
            _emit_field_csv(model, opts, out)
        write_config(out, "eval operator", opts)
    else:
        opts = resolve_options(EVAL_HOUSING_SPEC, args)
        rows = _eval_housing(opts, out)
        write_csv(os.path.join(out, "report.csv"),
                  ("band", "mae", "mean_std", "count"), rows)
        write_config(out, "eval housing", opts)
    return 0


def _emit_field_csv(model, opts: dict, out: str) -> None:
    """Predict one fresh test field and write it as tidy (x, t, ...) rows."""
    from .datagen import GRFConfig, GRFSampler, solve_diffusion_reaction

    rng = new_rng(opts["seed"] + opts["field-sample"])
    sampler = GRFSampler(GRFConfig(l=0.5, grid=model.sensor_grid))
    u = sampler.sample(rng, 1)[0]
    truth = solve_diffusion_reaction(u)
    mean, std, _ = predict_field(model, u, n_samples=opts["samples"],
                                 rng=new_rng(opts["seed"]))
    grid = model.query_grid()
    write_csv(os.path.join(out, "field.csv"),
              ("x", "t", "mean", "std", "truth"),
              np.column_stack([grid, mean.ravel()[:, None], std.ravel()[:, None],
                               truth.ravel()[:, None]]))
    print(f"wrote field.csv for a fresh l=0.5 input (index {opts['field-sample']})")


def _eval_housing(opts: dict, out: str):
    split_dir = require_file(opts["split-dir"] or "", "split-dir")
    csv_path = require_file(opts["csv"] or default_csv_path(), "csv")
    table = load_housing_csv(csv_path)
    predictor = _load_predictor(opts["model"], opts["kind"],
                                opts["samples"], opts["seed"])
    rows = []
    for band_i, name in enumerate(("id_test", "ood_part1", "ood_part2", "ood_part3")):
        header, idx = read_csv(os.path.join(split_dir, f"{name}.csv"))
        need_columns(header, ("row",), f"{split_dir}/{name}.csv")
        sel = idx[:, 0].astype(int)
        x_band, y_band = table[sel, :-1], table[sel, -1:]
        mean, std, _ = predictor(x_band)
        mae = float(np.abs(mean - y_band).mean())
        rows.append([band_i, mae, float(std.mean()), len(sel)])
        print(f"{name}: MAE={mae:.6f} mean std={rows[-1][2]:.6f} n={len(sel)}")
    return np.array(rows)


# ---------------------------------------------------------------------------
# plot

PLOT_KINDS = ("info-plane", "prediction", "rmse", "field", "trace")


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    from . import plots

    out = ensure_out_dir(args.out or "")
    path = require_file(args.csv or "", "csv")
    header, data = read_csv(path)
    kind = args.kind
    image = os.path.join(out, f"{kind.replace('-', '_')}.png")
    if kind == "info-plane":
        cols = need_columns(header, SWEEP_COLUMNS, path)
        rows = np.column_stack([data[:, cols[c]] for c in SWEEP_COLUMNS])
        plots.plot_info_plane(rows, image)
        write_csv(os.path.join(out, "info_plane_data.csv"), SWEEP_COLUMNS, rows)
    elif kind == "prediction":
        cols = need_columns(header, ("x", "mean", "std"), path)
        train_x = train_y = None
        if args.train_csv:
            tx_header, tx = read_csv(require_file(args.train_csv, "train-csv"))
            tcols = need_columns(tx_header, ("x", "y"), args.train_csv)
            train_x, train_y = tx[:, tcols["x"]], tx[:, tcols["y"]]
        truth = data[:, header.index("truth")] if "truth" in header else None
        plots.plot_prediction_band(data[:, cols["x"]], data[:, cols["mean"]],
                                   data[:, cols["std"]], image,
                                   train_x=train_x, train_y=train_y, truth=truth)
        tidy_cols = ["x", "mean", "std"] + (["truth"] if truth is not None else [])
        write_csv(os.path.join(out, "prediction_data.csv"), tuple(tidy_cols),
                  np.column_stack([data[:, header.index(c)] for c in tidy_cols]))
    elif kind == "rmse":
        cols = need_columns(header, ("l", "rmse", "std"), path)
        rows = np.column_stack([data[:, cols[c]] for c in ("l", "rmse", "std")])
        plots.plot_rmse_by_length(rows, image, train_l=args.train_l)
        write_csv(os.path.join(out, "rmse_data.csv"), ("l", "rmse", "std"), rows)
    elif kind == "field":
        cols = need_columns(header, ("x", "t", "mean", "std"), path)
        x_grid = np.unique(data[:, cols["x"]])
        t_grid = np.unique(data[:, cols["t"]])
        shape = (len(x_grid), len(t_grid))
        if len(data) != shape[0] * shape[1]:
            raise SchemaError(f"{path}: rows do not form a full (x, t) grid")
        order = np.lexsort((data[:, cols["t"]], data[:, cols["x"]]))
        mean = data[order, cols["mean"]].reshape(shape)
        std = data[order, cols["std"]].reshape(shape)
        truth = (data[order, header.index("truth")].reshape(shape)
                 if "truth" in header else None)
        plots.plot_field(x_grid, t_grid, mean, std, image, truth=truth)
        tidy_cols = ["x", "t", "mean", "std"] + (["truth"] if truth is not None else [])
        write_csv(os.path.join(out, "field_data.csv"), tuple(tidy_cols),
                  np.column_stack([data[order, header.index(c)] for c in tidy_cols]))
    else:
        cols = need_columns(header, METRIC_COLUMNS, path)
        rows = np.column_stack([data[:, cols[c]] for c in METRIC_COLUMNS])
        plots.plot_metrics_trace(rows, image)
        write_csv(os.path.join(out, "trace_data.csv"), METRIC_COLUMNS, rows)
    print(f"wrote {image}")
    return 0


# ---------------------------------------------------------------------------
# sweep-beta

SWEEP_SPEC = {
    "data": (str, "", "training CSV with x,y columns"),
    "betas": (str, "0.1,0.2,0.3,0.5,0.7,0.9", "comma-separated beta grid"),
    "seeds": (int, 3, "training runs per beta"),
    "seed": (int, 0, "base seed for run derivation"),
    "iterations": (int, 5000, "Adam iterations per run"),
    "tail": (int, 50, "trailing iterations averaged for the final estimate"),
    "workers": (int, 1, "parallel training processes"),
}


def cmd_sweep_beta(args) -> int:
    out = ensure_out_dir(args.out or "")
    opts = resolve_options(SWEEP_SPEC, args)
    x, y = load_xy_csv(require_file(opts["data"], "data"))
    betas = parse_float_list(opts["betas"])
    base = RegressionConfig(iterations=opts["iterations"], seed=opts["seed"])
    write_config(out, "sweep-beta", opts)
    rows = info_plane_sweep(x, y, betas, opts["seeds"], base_cfg=base,
                            tail=opts["tail"], workers=opts["workers"])
    write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, rows)
    for beta in betas:
        sel = rows[(rows[:, 0] == beta) & (rows[:, 5] == 1.0)]
        if len(sel):
            print(f"beta={beta:g}: best objective={sel[0, 2]:.6f} "
                  f"iyz={sel[0, 3]:.6f} izx={sel[0, 4]:.6f}")
        else:
            print(f"beta={beta:g}: all runs failed")
    return 0


# ---------------------------------------------------------------------------
# housing-fetch


def cmd_housing_fetch(args) -> int:
    dest = args.out or default_csv_path()
    try:
        fetch_housing(dest)
    except ImportError as err:
        raise RuntimeError(
            f"scikit-learn is required for the download helper: {err}") from err
    except OSError as err:
        raise RuntimeError(f"download failed (offline?): {err}") from err
    print(f"wrote {dest}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ibuq",
        description="Information-bottleneck UQ: data, training, evaluation, plots.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a dataset")
    p.add_argument("subtype", choices=("discontinuous", "operator", "housing-split"))
    p.add_argument("--out", help="output directory")
    for spec in (GEN_DISCONT_SPEC, GEN_OPERATOR_SPEC, GEN_HOUSING_SPEC):
        for name, (caster, default, help_text) in spec.items():
            if f"--{name}" not in p._option_string_actions:
                p.add_argument(f"--{name}", type=caster, default=None,
                               help=f"{help_text} (default {default})")
    p.add_argument("--config", metavar="FILE",
                   help="flat key=value config file; flags override it")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("mode", choices=("ibuq-regression", "ibuq-operator", "ensemble"))
    p.add_argument("--out", help="output directory")
    seen = set()
    for spec in (TRAIN_REG_SPEC, TRAIN_OP_SPEC, TRAIN_ENS_SPEC):
        for name, (caster, default, help_text) in spec.items():
            if name not in seen:
                seen.add(name)
                p.add_argument(f"--{name}", type=caster, default=None,
                               help=f"{help_text} (default {default})")
    p.add_argument("--config", metavar="FILE",
                   help="flat key=value config file; flags override it")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("mode", choices=("table1", "operator", "housing"))
    p.add_argument("--out", help="output directory")
    seen = set()
    for spec in (EVAL_TABLE1_SPEC, EVAL_OPERATOR_SPEC, EVAL_HOUSING_SPEC):
        for name, (caster, default, help_text) in spec.items():
            if name not in seen:
                seen.add(name)
                p.add_argument(f"--{name}", type=caster, default=None,
                               help=f"{help_text} (default {default})")
    p.add_argument("--config", metavar="FILE",
                   help="flat key=value config file; flags override it")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render a CSV artifact to an image")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("--csv", help="input CSV file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--train-csv", help="training data overlay for prediction plots")
    p.add_argument("--train-l", type=float, default=None,
                   help="training correlation length marker for rmse plots")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep-beta", help="information-plane beta sweep")
    p.add_argument("--out", help="output directory")
    add_option_flags(p, SWEEP_SPEC)
    p.set_defaults(func=cmd_sweep_beta)

    p = sub.add_parser("housing-fetch", help="download the housing CSV")
    p.add_argument("--out", help=f"destination path (default {default_csv_path()})")
    p.set_defaults(func=cmd_housing_fetch)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (SchemaError, TrainingError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
