"""Command-line experiment harness.

Subcommands: train, predict, crossval, benchmark, trace, gen-data. Options
come from (in increasing precedence) built-in defaults, a named --preset,
an INI --config file, and explicit command-line flags; the merged effective
configuration is echoed to ``effective_config.ini`` in the output directory
for provenance. All commands are deterministic given the seed; wall-clock
fields live in clearly separated [timing] sections / time_* columns so the
numeric outputs can be compared byte for byte across runs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from lapsvm import data as dataio
from lapsvm import models, solvers, stopping
from lapsvm.core import Problem
from lapsvm.data import Dataset, DataFormatError, SplitPlan
from lapsvm.graph import GraphSpec
from lapsvm.kernels import KernelSpec, cross_gram
from lapsvm.solvers import NewtonConfig, NumericalError, PcgConfig
from lapsvm.stopping import StopRule


class UsageError(Exception):
    pass


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULT_GAMMA_GRID = "1e-6,1e-4,1e-2,1e-1,1,10,100"


@dataclass
class ExperimentConfig:
    """Flat bag of every knob a command can use."""

    dataset: str | None = None
    format: str = "csv"
    generator: str | None = None
    n: int = 550
    noise: float = 0.05
    split_manifest: str | None = None
    labels_per_class: int | None = None
    val_size: int = 0

    kernel: str = "gaussian"
    sigma: float = 1.0
    degree: int = 3
    offset: float = 1.0
    distance_exponent: int = 2
    ridge: float = 0.0

    nn: int = 6
    graph_weight: str = "binary"
    heat_t: float = 1.0
    normalize_laplacian: bool = False
    laplacian_power: int = 1

    model_type: str = "lapsvm"
    gamma_a: float = 1e-6
    gamma_i: float = 1.0
    solver: str = "newton"
    stop: str = "never"
    eta: float = 1.5
    eta_validation: float | None = None
    tau: float = 1e-8
    theta: int | None = None
    max_iters: int | None = None
    step_size: float = 1.0

    labeled_size: int = 50
    validation_size: int = 50
    folds: int = 4
    randomizations: int = 3

    gamma_a_grid: str = DEFAULT_GAMMA_GRID
    gamma_i_grid: str = DEFAULT_GAMMA_GRID
    solvers: str = "newton,pcg:stability"
    repeats: int = 1

    model: str | None = None
    seed: int = 0
    jobs: int = 1
    out: str = "lapsvm-out"


PRESETS: dict[str, dict] = {
    # benchmark-protocol parameter bundles
    "g50c-newton": dict(
        generator="g50c", n=550, kernel="gaussian", sigma=17.5, nn=50,
        laplacian_power=5, normalize_laplacian=True, gamma_a=1e-1, gamma_i=10.0,
        model_type="lapsvm", solver="newton",
        labeled_size=50, validation_size=50, folds=4, randomizations=3,
    ),
    "g50c-pcg-stability": dict(
        generator="g50c", n=550, kernel="gaussian", sigma=17.5, nn=50,
        laplacian_power=5, normalize_laplacian=True, gamma_a=1e-1, gamma_i=10.0,
        model_type="lapsvm", solver="pcg", stop="stability",
        labeled_size=50, validation_size=50, folds=4, randomizations=3,
    ),
    "g50c-laprlsc": dict(
        generator="g50c", n=550, kernel="gaussian", sigma=17.5, nn=50,
        laplacian_power=5, normalize_laplacian=True, gamma_a=1e-6, gamma_i=1e-2,
        model_type="laprlsc",
        labeled_size=50, validation_size=50, folds=4, randomizations=3,
    ),
    "g50c-svm": dict(
        generator="g50c", n=550, kernel="gaussian", sigma=17.5,
        gamma_a=1e-1, gamma_i=0.0, model_type="lapsvm", solver="newton",
        labeled_size=50, validation_size=50, folds=4, randomizations=3,
    ),
    # label-diffusion demo: 1 label per class, PCG reaches 0% unlabeled error
    # after a handful of iterations
    "two-moons": dict(
        generator="two-moons", n=200, noise=0.05, labels_per_class=1,
        kernel="gaussian", sigma=0.3, nn=6, laplacian_power=1,
        normalize_laplacian=True, gamma_a=1e-6, gamma_i=100.0,
        model_type="lapsvm", solver="pcg", stop="stability", seed=0,
    ),
}

_BOOL_KEYS = {"normalize_laplacian"}
_INT_KEYS = {
    "n", "degree", "distance_exponent", "nn", "laplacian_power", "theta",
    "max_iters", "labeled_size", "validation_size", "folds", "randomizations",
    "seed", "jobs", "repeats", "labels_per_class", "val_size",
}
_FLOAT_KEYS = {
    "noise", "sigma", "offset", "ridge", "heat_t", "gamma_a", "gamma_i",
    "eta", "eta_validation", "tau", "step_size",
}


def _coerce(key: str, value: str):
    if key in _BOOL_KEYS:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def load_config_file(path: str) -> dict:
    parser = _ini()
    read = parser.read(path)
    if not read:
        raise DataFormatError(f"config file not found: {path}")
    merged = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = key.replace("-", "_")
            if not any(f.name == key for f in fields(ExperimentConfig)):
                raise UsageError(f"unknown config key {key!r} in {path}")
            merged[key] = _coerce(key, value)
    return merged


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    preset = getattr(args, "preset", None)
    if preset:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}")
        cfg = replace(cfg, **PRESETS[preset])
    conf_path = getattr(args, "config", None)
    if conf_path:
        cfg = replace(cfg, **load_config_file(conf_path))
    overrides = {}
    for f in fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    return replace(cfg, **overrides)


def _ini() -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep role keys like err_U case-sensitive
    return parser


def write_effective_config(cfg: ExperimentConfig, out_dir: str, command: str) -> None:
    parser = _ini()
    parser["run"] = {"command": command}
    parser["config"] = {
        f.name: ("" if getattr(cfg, f.name) is None else str(getattr(cfg, f.name)))
        for f in fields(cfg)
    }
    with open(os.path.join(out_dir, "effective_config.ini"), "w", encoding="utf-8") as fh:
        parser.write(fh)


# ---------------------------------------------------------------------------
# config -> library objects
# ---------------------------------------------------------------------------


def kernel_spec(cfg: ExperimentConfig) -> KernelSpec:
    return KernelSpec(
        kind=cfg.kernel,
        sigma=cfg.sigma,
        degree=cfg.degree,
        offset=cfg.offset,
        distance_exponent=cfg.distance_exponent,
    )


def graph_spec(cfg: ExperimentConfig) -> GraphSpec:
    return GraphSpec(
        nn=cfg.nn,
        weight=cfg.graph_weight,
        heat_t=cfg.heat_t,
        normalize=cfg.normalize_laplacian,
        power=cfg.laplacian_power,
    )


def stop_rule(cfg: ExperimentConfig) -> StopRule:
    kind = cfg.stop
    if kind not in stopping.KINDS:
        raise UsageError(f"unknown stop rule {kind!r}; expected one of {stopping.KINDS}")
    return StopRule(
        kind=kind,
        tau=cfg.tau,
        eta_stability=cfg.eta,
        eta_validation=cfg.eta_validation,
    )


def solver_configs(cfg: ExperimentConfig, record_traces: bool = True):
    newton_cfg = NewtonConfig(step_size=cfg.step_size, max_steps=cfg.max_iters or 50,
                              record_traces=record_traces)
    pcg_cfg = PcgConfig(
        max_iters=cfg.max_iters,
        check_gap=cfg.theta,
        stop_rule=stop_rule(cfg),
        record_traces=record_traces,
    )
    return newton_cfg, pcg_cfg


def load_or_generate(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset and cfg.generator:
        raise UsageError("give either --dataset or --generator, not both")
    if cfg.dataset:
        if not os.path.exists(cfg.dataset):
            raise DataFormatError(f"dataset file does not exist: {cfg.dataset}")
        return dataio.load_dataset(cfg.dataset, cfg.format)
    if cfg.generator in ("g50c",):
        return dataio.generate_g50c(cfg.n, seed=cfg.seed)
    if cfg.generator in ("two-moons", "two_moons"):
        return dataio.generate_two_moons(cfg.n, noise=cfg.noise, seed=cfg.seed)
    if cfg.generator:
        raise UsageError(f"unknown generator {cfg.generator!r}; expected 'g50c' or 'two-moons'")
    raise UsageError("a dataset is required: pass --dataset PATH or --generator NAME")


def single_split(cfg: ExperimentConfig, ds: Dataset) -> Dataset:
    """Partition for the one-split commands (train, trace)."""
    if cfg.split_manifest:
        return dataio.load_split_manifest(ds, cfg.split_manifest)
    if cfg.labels_per_class is not None:
        return dataio.scarce_label_split(ds, per_class=cfg.labels_per_class,
                                         n_validation=cfg.val_size, seed=cfg.seed)
    if ds.partition is not None:
        return ds
    return ds.with_partition(np.full(ds.n, dataio.LABELED, dtype="<U1"))


def _train_one(cfg: ExperimentConfig, split: Dataset, record_traces=True, artifacts=None):
    ks = kernel_spec(cfg)
    gs = graph_spec(cfg) if cfg.gamma_i > 0 else None
    newton_cfg, pcg_cfg = solver_configs(cfg, record_traces)
    if cfg.model_type == "laprlsc":
        return models.train_laprlsc(split, ks, gs, cfg.gamma_a, cfg.gamma_i,
                                    ridge=cfg.ridge, artifacts=artifacts)
    if cfg.model_type != "lapsvm":
        raise UsageError(f"unknown model type {cfg.model_type!r}; expected 'lapsvm' or 'laprlsc'")
    return models.train_lapsvm(split, ks, gs, cfg.gamma_a, cfg.gamma_i,
                               solver=cfg.solver, newton_config=newton_cfg,
                               pcg_config=pcg_cfg, ridge=cfg.ridge, artifacts=artifacts)


def split_errors(model, split: Dataset) -> dict[str, float]:
    errs = {}
    for role in dataio.ROLES:
        idx = split.role_indices(role)
        if idx.size == 0:
            continue
        decisions, _ = models.predict(model, split.points[idx])
        errs[role] = models.error_rate(decisions, split.labels[idx])
    return errs


def _fmt(value: float) -> str:
    return repr(float(value))


def _ensure_out(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_data(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg)
    if not cfg.generator:
        raise UsageError("gen-data requires --generator")
    ds = load_or_generate(cfg)
    path = os.path.join(out, "dataset.csv")
    dataio.save_dataset(ds, path, fmt="csv")
    write_effective_config(cfg, out, "gen-data")
    print(f"wrote {ds.n} points x {ds.n_features} features to {path}")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg)
    ds = load_or_generate(cfg)
    split = single_split(cfg, ds)

    t0 = time.perf_counter()
    ks = kernel_spec(cfg)
    gs = graph_spec(cfg) if cfg.gamma_i > 0 else None
    artifacts = models.prepare_training(split, ks, gs, ridge=cfg.ridge, need_graph=cfg.gamma_i > 0)
    t_prep = time.perf_counter() - t0

    t1 = time.perf_counter()
    model = _train_one(cfg, split, artifacts=artifacts)
    t_solve = time.perf_counter() - t1

    errs = split_errors(model, split)
    model_path = os.path.join(out, "model.json")
    models.save_model(model, model_path)

    report = _ini()
    report["errors"] = {f"err_{role}": _fmt(val) for role, val in errs.items()}
    solver_section = {}
    for i, rep in enumerate(model.solve_reports):
        if rep is None:
            continue
        solver_section[f"class_{model.classes[i]}_iterations"] = str(rep.iterations)
        solver_section[f"class_{model.classes[i]}_line_search_iters"] = str(rep.line_search_iters_total)
        solver_section[f"class_{model.classes[i]}_stop_reason"] = rep.stop_reason.value
        solver_section[f"class_{model.classes[i]}_final_objective"] = (
            _fmt(rep.objective_trace[-1]) if rep.objective_trace else ""
        )
    report["solver"] = solver_section
    report["timing"] = {
        "prep_seconds": f"{t_prep:.6f}",
        "solve_seconds": f"{t_solve:.6f}",
        "total_seconds": f"{t_prep + t_solve:.6f}",
    }
    report_path = os.path.join(out, "report.ini")
    with open(report_path, "w", encoding="utf-8") as fh:
        report.write(fh)
    write_effective_config(cfg, out, "train")

    shown = ", ".join(f"err({role})={val:.2f}%" for role, val in errs.items())
    print(f"trained {cfg.model_type} ({cfg.solver}); {shown}")
    print(f"model: {model_path}\nreport: {report_path}")
    return EXIT_OK


def cmd_predict(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg)
    if not cfg.model:
        raise UsageError("predict requires --model FILE")
    if not os.path.exists(cfg.model):
        raise DataFormatError(f"model file does not exist: {cfg.model}")
    model = models.load_model(cfg.model)
    ds = load_or_generate(cfg)
    decisions, scores = models.predict(model, ds.points)
    path = os.path.join(out, "predictions.csv")
    with open(path, "w", encoding="utf-8") as fh:
        if model.is_binary:
            fh.write("index,decision,score\n")
            for i, (d, s) in enumerate(zip(decisions, scores)):
                fh.write(f"{i},{d},{_fmt(s)}\n")
        else:
            header = ",".join(f"score_{c}" for c in model.classes)
            fh.write(f"index,decision,{header}\n")
            for i, d in enumerate(decisions):
                row = ",".join(_fmt(v) for v in scores[i])
                fh.write(f"{i},{d},{row}\n")
    err = models.error_rate(decisions, ds.labels)
    write_effective_config(cfg, out, "predict")
    print(f"wrote {path} (error vs file labels: {err:.2f}%)")
    return EXIT_OK


def _plan(cfg: ExperimentConfig) -> SplitPlan:
    return SplitPlan(
        n_labeled=cfg.labeled_size,
        n_validation=cfg.validation_size,
        folds=cfg.folds,
        randomizations=cfg.randomizations,
        seed=cfg.seed,
    )


def _parse_grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad grid specification {text!r}") from None
    if not values:
        raise UsageError("gamma grid must be nonempty")
    return values


def cmd_crossval(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg)
    ds = load_or_generate(cfg)
    splits = dataio.make_splits(ds, _plan(cfg))
    ks = kernel_spec(cfg)
    gs = graph_spec(cfg)

    # Gram and Laplacian depend only on the split, so build them once per
    # split and share them across every grid cell.
    artifacts = [models.prepare_training(s, ks, gs, ridge=cfg.ridge) for s in splits]

    ga_grid = _parse_grid(cfg.gamma_a_grid)
    gi_grid = _parse_grid(cfg.gamma_i_grid)
    cells = [(ga, gi) for gi in gi_grid for ga in ga_grid]

    def eval_cell(cell):
        ga, gi = cell
        cell_cfg = replace(cfg, gamma_a=ga, gamma_i=gi)
        errors = []
        try:
            for split, art in zip(splits, artifacts):
                model = _train_one(cell_cfg, split, record_traces=False, artifacts=art)
                v_idx = split.role_indices(dataio.VALIDATION)
                if v_idx.size == 0:
                    raise UsageError("crossval requires validation sets; set --validation-size")
                decisions, _ = models.predict(model, split.points[v_idx])
                errors.append(models.error_rate(decisions, split.labels[v_idx]))
        except UsageError:
            raise
        except Exception as exc:  # cell is marked failed, the sweep continues
            return ("failed", float("nan"), float("nan"), f"{type(exc).__name__}: {exc}")
        arr = np.array(errors)
        return ("ok", float(arr.mean()), float(arr.std()), "")

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(eval_cell, cells))
    else:
        results = [eval_cell(c) for c in cells]

    table_path = os.path.join(out, "crossval_grid.csv")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("gamma_a,gamma_i,status,mean_v_error,std_v_error,message\n")
        for (ga, gi), (status, mean, std, msg) in zip(cells, results):
            mean_s = "" if status != "ok" else _fmt(mean)
            std_s = "" if status != "ok" else _fmt(std)
            fh.write(f"{_fmt(ga)},{_fmt(gi)},{status},{mean_s},{std_s},{msg}\n")

    ok = [(cell, res) for cell, res in zip(cells, results) if res[0] == "ok"]
    if not ok:
        raise NumericalError("every grid cell failed")
    # lowest mean error; ties prefer smaller gamma_i, then smaller gamma_a
    best_cell, best_res = min(ok, key=lambda item: (item[1][1], item[0][1], item[0][0]))

    summary = _ini()
    summary["best"] = {
        "gamma_a": _fmt(best_cell[0]),
        "gamma_i": _fmt(best_cell[1]),
        "mean_v_error": _fmt(best_res[1]),
        "std_v_error": _fmt(best_res[2]),
        "n_splits": str(len(splits)),
    }
    with open(os.path.join(out, "crossval_best.ini"), "w", encoding="utf-8") as fh:
        summary.write(fh)
    write_effective_config(cfg, out, "crossval")
    print(f"best cell: gamma_a={best_cell[0]:g} gamma_i={best_cell[1]:g} "
          f"mean err(V)={best_res[1]:.2f}%")
    print(f"grid table: {table_path}")
    return EXIT_OK


def _parse_solver_variants(text: str, cfg: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    variants = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split(":")
        name = parts[0]
        if name == "newton":
            variants.append((token, replace(cfg, solver="newton", model_type="lapsvm")))
        elif name == "laprlsc":
            variants.append((token, replace(cfg, model_type="laprlsc")))
        elif name == "pcg":
            stop = parts[1] if len(parts) > 1 else "never"
            sub = replace(cfg, solver="pcg", stop=stop, model_type="lapsvm")
            if len(parts) > 2:
                sub = replace(sub, tau=float(parts[2]))
            variants.append((token, sub))
        else:
            raise UsageError(f"unknown solver variant {token!r}")
    if len(variants) < 2:
        raise UsageError("benchmark needs at least 2 solver variants (--solvers a,b)")
    return variants


def cmd_benchmark(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg)
    ds = load_or_generate(cfg)
    splits = dataio.make_splits(ds, _plan(cfg))
    ks = kernel_spec(cfg)
    gs = graph_spec(cfg)
    variants = _parse_solver_variants(cfg.solvers, cfg)

    # Gram/Laplacian construction stays outside the timed region; timing runs
    # are forced sequential and trace recording is disabled.
    artifacts = [models.prepare_training(s, ks, gs, ridge=cfg.ridge) for s in splits]

    rows = []
    for token, vcfg in variants:
        times, iters, ls_iters = [], [], []
        err_acc: dict[str, list[float]] = {}
        for split, art in zip(splits, artifacts):
            samples = []
            for _ in range(max(1, cfg.repeats)):
                t0 = time.perf_counter()
                model = _train_one(vcfg, split, record_traces=False, artifacts=art)
                samples.append(time.perf_counter() - t0)
            times.append(float(np.median(samples)))
            reps = [r for r in model.solve_reports if r is not None]
            iters.append(float(np.mean([r.iterations for r in reps])) if reps else 0.0)
            ls_iters.append(
                float(np.mean([r.line_search_iters_total for r in reps])) if reps else 0.0
            )
            for role, err in split_errors(model, split).items():
                err_acc.setdefault(role, []).append(err)
        row = {
            "solver": token,
            "iterations_mean": float(np.mean(iters)),
            "line_search_iters_mean": float(np.mean(ls_iters)),
            "time_mean_s": float(np.mean(times)),
            "time_std_s": float(np.std(times)),
        }
        for role, vals in sorted(err_acc.items()):
            row[f"err_{role}_mean"] = float(np.mean(vals))
            row[f"err_{role}_std"] = float(np.std(vals))
        rows.append(row)

    keys = ["solver", "iterations_mean", "line_search_iters_mean"]
    err_keys = sorted({k for row in rows for k in row if k.startswith("err_")})
    keys += err_keys + ["time_mean_s", "time_std_s"]
    path = os.path.join(out, "benchmark.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(
                row["solver"] if k == "solver" else _fmt(row.get(k, float("nan")))
                for k in keys
            ) + "\n")
    write_effective_config(cfg, out, "benchmark")
    for row in rows:
        print(f"{row['solver']}: time {row['time_mean_s']:.3f}s "
              f"(std {row['time_std_s']:.3f}), iters {row['iterations_mean']:.1f}")
    print(f"benchmark table: {path}")
    return EXIT_OK


def cmd_trace(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg)
    if cfg.solver != "pcg":
        raise UsageError("trace requires --solver pcg")
    ds = load_or_generate(cfg)
    split = single_split(cfg, ds)
    ks = kernel_spec(cfg)
    gs = graph_spec(cfg) if cfg.gamma_i > 0 else None
    artifacts = models.prepare_training(split, ks, gs, ridge=cfg.ridge, need_graph=cfg.gamma_i > 0)

    classes = np.unique(split.labels)
    binary = models._binary_class_list(split.labels)
    if binary is None and classes.size != 2:
        raise UsageError("trace supports binary problems only")
    positive = binary[0] if binary is not None else int(classes[-1])

    y = models._binary_targets(artifacts.labels, artifacts.l, positive)
    problem = Problem(
        K=artifacts.gram_values,
        L=artifacts.lap if cfg.gamma_i > 0 else None,
        y=y, l=artifacts.l, gamma_a=cfg.gamma_a, gamma_i=cfg.gamma_i,
    )

    # out-of-sample blocks for the validation/test error columns
    cross = {}
    for role in (dataio.VALIDATION, dataio.TEST):
        idx = split.role_indices(role)
        if idx.size:
            kq = cross_gram(ks, artifacts.problem_points, split.points[idx])
            yq = np.where(split.labels[idx] == positive, 1.0, -1.0)
            cross[role] = (kq, yq)

    _, pcg_cfg = solver_configs(cfg)
    if pcg_cfg.stop_rule.needs_validation:
        kv, yv = models._validation_inputs(split, artifacts, ks, positive)
        pcg_cfg = replace(pcg_cfg, validation_gram=kv, validation_labels=yv)

    rows = []
    y_lab = y[: artifacts.l]
    y_unlab = np.where(artifacts.labels[artifacts.l:] == positive, 1.0, -1.0)

    def callback(t, info):
        row = {
            "t": t,
            "objective": info["objective"],
            "grad_norm": info["grad_norm"],
            "pgrad_norm": info["pgrad_norm"],
            "mixed_product": info["mixed_product"],
        }
        if info["is_check"] or t == 0:
            f = info["f"]
            dec_lab = np.where(f[: artifacts.l] >= 0, 1.0, -1.0)
            row["err_L"] = 100.0 * float(np.mean(dec_lab != y_lab))
            if artifacts.labels.shape[0] > artifacts.l:
                dec_u = np.where(f[artifacts.l:] >= 0, 1.0, -1.0)
                row["err_U"] = 100.0 * float(np.mean(dec_u != y_unlab))
            for role, (kq, yq) in cross.items():
                dec = np.where(kq @ info["alpha"] + info["b"] >= 0, 1.0, -1.0)
                row[f"err_{role}"] = 100.0 * float(np.mean(dec != yq))
        rows.append(row)

    solvers.pcg_solve(problem, pcg_cfg, callback=callback)

    base = {k: rows[0][k] for k in ("objective", "grad_norm", "pgrad_norm", "mixed_product")}
    err_cols = [f"err_{r}" for r in dataio.ROLES if any(f"err_{r}" in row for row in rows)]
    header = ["t", "objective", "grad_norm", "pgrad_norm", "mixed_product",
              "objective_rel", "grad_norm_rel", "pgrad_norm_rel", "mixed_product_rel"] + err_cols
    path = os.path.join(out, "trace.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            vals = [str(row["t"])]
            for k in ("objective", "grad_norm", "pgrad_norm", "mixed_product"):
                vals.append(_fmt(row[k]))
            for k in ("objective", "grad_norm", "pgrad_norm", "mixed_product"):
                denom = base[k]
                vals.append(_fmt(row[k] / denom if denom else float("nan")))
            for col in err_cols:
                vals.append(_fmt(row[col]) if col in row else "")
            fh.write(",".join(vals) + "\n")
    write_effective_config(cfg, out, "trace")
    print(f"trace with {len(rows) - 1} iterations: {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override its keys")
    p.add_argument("--preset", help=f"named parameter bundle: {', '.join(sorted(PRESETS))}")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="parallel workers for splits/grid cells")

    p.add_argument("--dataset", help="dataset file path")
    p.add_argument("--format", choices=["csv", "libsvm"])
    p.add_argument("--generator", choices=["g50c", "two-moons"])
    p.add_argument("--n", type=int, help="generated dataset size")
    p.add_argument("--noise", type=float, help="two-moons jitter")
    p.add_argument("--split-manifest", dest="split_manifest")
    p.add_argument("--labels-per-class", dest="labels_per_class", type=int)
    p.add_argument("--val-size", dest="val_size", type=int)

    p.add_argument("--kernel", choices=["gaussian", "polynomial", "linear"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--offset", type=float)
    p.add_argument("--distance-exponent", dest="distance_exponent", type=int, choices=[1, 2])
    p.add_argument("--ridge", type=float)

    p.add_argument("--nn", type=int)
    p.add_argument("--graph-weight", dest="graph_weight", choices=["binary", "heat"])
    p.add_argument("--heat-t", dest="heat_t", type=float)
    p.add_argument("--normalize-laplacian", dest="normalize_laplacian",
                   action="store_const", const=True)
    p.add_argument("--laplacian-power", dest="laplacian_power", type=int)

    p.add_argument("--model-type", dest="model_type", choices=["lapsvm", "laprlsc"])
    p.add_argument("--gamma-a", dest="gamma_a", type=float)
    p.add_argument("--gamma-i", dest="gamma_i", type=float)
    p.add_argument("--solver", choices=["newton", "pcg"])
    p.add_argument("--stop", choices=list(stopping.KINDS))
    p.add_argument("--eta", type=float, help="stability tolerance (percent)")
    p.add_argument("--eta-validation", dest="eta_validation", type=float)
    p.add_argument("--tau", type=float, help="norm-rule threshold")
    p.add_argument("--theta", type=int, help="stop-rule check gap")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--step-size", dest="step_size", type=float)

    p.add_argument("--labeled-size", dest="labeled_size", type=int)
    p.add_argument("--validation-size", dest="validation_size", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--randomizations", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="lapsvm", description=__doc__, add_help=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model on a single split")
    _add_common(p)

    p = sub.add_parser("predict", help="apply a saved model to a dataset")
    _add_common(p)
    p.add_argument("--model", help="model file from `train`")

    p = sub.add_parser("crossval", help="grid-search gamma_a/gamma_i over the split protocol")
    _add_common(p)
    p.add_argument("--gamma-a-grid", dest="gamma_a_grid")
    p.add_argument("--gamma-i-grid", dest="gamma_i_grid")

    p = sub.add_parser("benchmark", help="compare solver variants (timing and accuracy)")
    _add_common(p)
    p.add_argument("--solvers", help="comma list, e.g. newton,pcg:stability")
    p.add_argument("--repeats", type=int, help="timing repeats per split (min is kept)")

    p = sub.add_parser("trace", help="per-iteration PCG trace CSV")
    _add_common(p)

    p = sub.add_parser("gen-data", help="write a synthetic dataset to CSV")
    _add_common(p)
    return parser


_COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "crossval": cmd_crossval,
    "benchmark": cmd_benchmark,
    "trace": cmd_trace,
    "gen-data": cmd_gen_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = build_config(args)
        if args.command == "benchmark":
            cfg = replace(cfg, jobs=1)  # clean timings
        return _COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
