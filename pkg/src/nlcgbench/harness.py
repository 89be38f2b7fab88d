"""Experiment harness: configs, deterministic runs, CSV logs, sweeps.

A run is a pure function of its configuration: data generation, weight
init, batch order, and every optimizer update are seeded, so re-running a
config reproduces the log byte for byte (wall-clock timings aside).  Logs
are flushed row by row, so an interrupted run leaves a valid CSV prefix.
A run whose loss goes non-finite stops early and is marked diverged —
that is a result, not an error.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .batching import BatchPlan, averaged_gradient, next_batch
from .errors import ConfigError, NumericError
from .linesearch import LineSearchConfig
from .numerics import norm
from .optimizers import (
    FirstOrderState,
    OptimizerKind,
    nlcg_init,
    nlcg_step,
    momentum_step,
    rmsprop_step,
    sgd_step,
)
from .preconditioner import PreconditionerState
from .problems import (
    Dataset,
    LogisticRegressionProblem,
    MlpProblem,
    Problem,
    accuracy,
    load_csv_dataset,
    make_quadratic,
    make_synthetic_classification,
)
from .schedule import ScheduleConfig, default_regime, lr_at

RUN_COLUMNS = [
    "step",
    "epoch",
    "train_loss",
    "lr_global",
    "lr_scale",
    "lr_effective",
    "beta_raw",
    "beta_clamped",
    "grad_norm",
    "wall_ms",
    "train_accuracy",
    "test_accuracy",
]


@dataclass(frozen=True)
class RunConfig:
    # problem
    problem: str = "mlp"
    quadratic_dim: int = 10
    quadratic_condition: float = 100.0
    quadratic_diagonal: bool = False
    quadratic_min_eigenvalue: float = 1.0
    dataset: str = "synthetic"
    dataset_path: str = ""
    label_column: str = "label"
    num_samples: int = 1024
    feature_dim: int = 16
    num_classes: int = 10
    separation: float = 3.0
    data_seed: int = 0
    test_fraction: float = 0.0
    hidden_layers: tuple[int, ...] = (32,)
    # optimizer
    optimizer: str = "nlcg_fr"
    momentum_coeff: float = 0.9
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-10
    force_beta_zero: bool = False
    # preconditioner
    precond_identity: bool = False
    curvature_floor: float = 1e-8
    skip_tolerance: float = 1e-12
    # line search
    ls_enabled: bool = True
    ls_auto_disable_below: int = 2048
    ls_increase_threshold: float = 0.02
    ls_flat_threshold: float = 0.01
    ls_decrease_factor: float = 0.025
    ls_increase_factor: float = 0.025
    # batching
    micro_batch_size: int = 64
    virtual_factor: int = 1
    drop_fraction: float = 0.0
    allow_wraparound: bool = False
    # schedule (negative warmup/final mean "use the batch-size default")
    base_lr: float = 0.1
    reference_batch: int = 256
    initial_lr: float = 0.001
    final_lr: float = -1.0
    warmup_epochs: float = -1.0
    decay_interval_epochs: float = 2.0
    regime_scale: float = 1.0
    # run
    epochs: float = 10.0
    seed: int = 0
    eval_every: int = 0
    precision: str = "f64"
    run_name: str = ""


_PROBLEMS = ("quadratic", "logistic_regression", "mlp")
_DATASETS = ("synthetic", "csv")
_PRECISIONS = ("f64", "f32")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part.strip()) for part in text.split(","))


def _parsers() -> dict:
    """Per-key value parsers, derived from the RunConfig field types."""
    out = {}
    for f in fields(RunConfig):
        if f.type in ("int", int):
            out[f.name] = int
        elif f.type in ("float", float):
            out[f.name] = float
        elif f.type in ("bool", bool):
            out[f.name] = _parse_bool
        elif f.name == "hidden_layers":
            out[f.name] = _parse_int_tuple
        else:
            out[f.name] = str
    return out


CONFIG_PARSERS = _parsers()


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse `key = value` lines into a RunConfig.

    Blank lines and `#` comments are ignored.  Unknown keys, duplicate
    keys, and unparseable values are configuration errors.
    """
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_PARSERS:
            raise ConfigError(f"{source}: line {line_no}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"{source}: line {line_no}: duplicate key '{key}'")
        try:
            values[key] = CONFIG_PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}: line {line_no}: bad value for '{key}': {exc}") from exc
    config = RunConfig(**values)
    validate_config(config)
    return config


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), source=path)


def validate_config(config: RunConfig) -> None:
    if config.problem not in _PROBLEMS:
        raise ConfigError(f"problem must be one of {_PROBLEMS}, got '{config.problem}'")
    if config.dataset not in _DATASETS:
        raise ConfigError(f"dataset must be one of {_DATASETS}, got '{config.dataset}'")
    if config.precision not in _PRECISIONS:
        raise ConfigError(f"precision must be one of {_PRECISIONS}, got '{config.precision}'")
    try:
        OptimizerKind(config.optimizer)
    except ValueError:
        raise ConfigError(
            f"optimizer must be one of {[k.value for k in OptimizerKind]}, "
            f"got '{config.optimizer}'"
        ) from None
    if config.problem == "mlp" and not config.hidden_layers:
        raise ConfigError("mlp runs need at least one hidden layer")
    if config.dataset == "csv" and config.problem != "quadratic" and not config.dataset_path:
        raise ConfigError("dataset = csv needs dataset_path")
    if not 0.0 <= config.test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in [0, 1), got {config.test_fraction}")
    if config.epochs <= 0.0:
        raise ConfigError(f"epochs must be positive, got {config.epochs}")
    if config.eval_every < 0:
        raise ConfigError(f"eval_every must be >= 0, got {config.eval_every}")


@dataclass(frozen=True)
class RunResult:
    optimizer: str
    csv_path: str | None
    steps_logged: int
    final_loss: float
    final_train_accuracy: float | None
    final_test_accuracy: float | None
    best_accuracy: float | None
    diverged: bool
    final_weights: np.ndarray
    config: RunConfig


def _dtype_for(config: RunConfig):
    return np.float32 if config.precision == "f32" else np.float64


def build_problem(config: RunConfig) -> tuple[Problem, Dataset | None, Dataset | None]:
    """Instantiate the configured problem plus train/test datasets."""
    dtype = _dtype_for(config)
    if config.problem == "quadratic":
        problem = make_quadratic(
            config.quadratic_dim,
            config.quadratic_condition,
            config.data_seed,
            diagonal=config.quadratic_diagonal,
            min_eigenvalue=config.quadratic_min_eigenvalue,
            dtype=dtype,
        )
        return problem, None, None

    if config.dataset == "csv":
        full = load_csv_dataset(config.dataset_path, config.label_column, dtype=dtype)
    else:
        full = make_synthetic_classification(
            config.num_samples,
            config.feature_dim,
            config.num_classes,
            config.separation,
            config.data_seed,
            dtype=dtype,
        )
    num_classes = full.num_classes
    if config.test_fraction > 0.0:
        n_test = int(round(full.num_samples * config.test_fraction))
        n_train = full.num_samples - n_test
        if n_train < 1 or n_test < 1:
            raise ConfigError("test_fraction leaves an empty train or test split")
        train = Dataset(full.features[:n_train], full.labels[:n_train], name=full.name + "-train")
        test = Dataset(full.features[n_train:], full.labels[n_train:], name=full.name + "-test")
    else:
        train, test = full, None

    if config.problem == "logistic_regression":
        problem = LogisticRegressionProblem(train, num_classes=num_classes, dtype=dtype)
    else:
        problem = MlpProblem(train, config.hidden_layers, num_classes=num_classes, dtype=dtype)
    return problem, train, test


def build_plan(config: RunConfig, train: Dataset | None) -> BatchPlan:
    """Batch plan for the run; quadratic objectives get one full step per epoch."""
    if train is None:
        dataset_size = config.micro_batch_size * config.virtual_factor
    else:
        dataset_size = train.num_samples
    return BatchPlan(
        dataset_size=dataset_size,
        micro_batch_size=config.micro_batch_size,
        virtual_factor=config.virtual_factor,
        seed=config.seed,
        drop_fraction=config.drop_fraction,
        allow_wraparound=config.allow_wraparound,
    )


def build_schedule(config: RunConfig, effective_batch: int, steps_per_epoch: int) -> ScheduleConfig:
    default_warmup, default_final = default_regime(effective_batch, config.regime_scale)
    warmup = config.warmup_epochs if config.warmup_epochs >= 0.0 else default_warmup
    final_lr = config.final_lr if config.final_lr > 0.0 else default_final
    return ScheduleConfig(
        batch_size=effective_batch,
        total_epochs=config.epochs,
        steps_per_epoch=steps_per_epoch,
        initial_lr=config.initial_lr,
        final_lr=final_lr,
        warmup_epochs=warmup,
        decay_interval_epochs=config.decay_interval_epochs,
        base_lr=config.base_lr,
        reference_batch=config.reference_batch,
    )


def build_linesearch_config(config: RunConfig, effective_batch: int) -> LineSearchConfig:
    enabled = config.ls_enabled and effective_batch >= config.ls_auto_disable_below * config.regime_scale
    return LineSearchConfig(
        increase_threshold=config.ls_increase_threshold,
        flat_threshold=config.ls_flat_threshold,
        decrease_factor=config.ls_decrease_factor,
        increase_factor=config.ls_increase_factor,
        enabled=enabled,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def default_run_name(config: RunConfig) -> str:
    return config.run_name or f"run_{config.optimizer}_seed{config.seed}"


def run(config: RunConfig, out_dir: str = ".", write_csv: bool = True) -> RunResult:
    """Execute one training run and stream its log to a CSV file.

    Returns the run summary; a diverged run (non-finite loss or weights)
    is reported through the `diverged` flag, never as an exception.
    """
    validate_config(config)
    problem, train_ds, test_ds = build_problem(config)
    plan = build_plan(config, train_ds)
    sched = build_schedule(config, plan.effective_batch, plan.steps_per_epoch)
    ls_config = build_linesearch_config(config, plan.effective_batch)
    kind = OptimizerKind(config.optimizer)
    t_max = sched.total_steps
    if t_max < 1:
        raise ConfigError("configuration yields zero training steps")

    weights = problem.initial_weights(config.seed)
    diverged = False
    nlcg_state = None
    fo_state = None
    ev = None
    try:
        ev = averaged_gradient(problem, weights, next_batch(plan))
        if kind.is_nlcg:
            precond = PreconditionerState.initial(
                problem.weight_count,
                curvature_floor=config.curvature_floor,
                skip_tolerance=config.skip_tolerance,
                identity_mode=config.precond_identity,
            )
            nlcg_state = nlcg_init(
                weights,
                ev.gradient,
                precond,
                ls_config=ls_config,
                variant="pr" if kind is OptimizerKind.NLCG_PR else "fr",
                force_beta_zero=config.force_beta_zero,
            )
        else:
            fo_state = FirstOrderState.initial(
                problem.weight_count,
                momentum_coeff=config.momentum_coeff,
                rms_decay=config.rms_decay,
                epsilon=config.rms_epsilon,
            )
            step_fn = {
                OptimizerKind.SGD: sgd_step,
                OptimizerKind.MOMENTUM: momentum_step,
                OptimizerKind.RMSPROP: rmsprop_step,
            }[kind]
    except NumericError:
        diverged = True

    csv_path = None
    fh = None
    writer = None
    if write_csv:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, default_run_name(config) + ".csv")
        fh = open(csv_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(RUN_COLUMNS)
        fh.flush()

    is_classification = train_ds is not None
    steps_logged = 0
    final_loss = math.nan
    final_train_acc = None
    final_test_acc = None
    best_acc = None

    try:
        for t in range(1, t_max + 1):
            if diverged:
                break
            started = time.perf_counter()
            lr_global = lr_at(sched, t - 1)
            try:
                if nlcg_state is not None:
                    weights, nlcg_state, metrics = nlcg_step(
                        nlcg_state,
                        weights,
                        lambda w: averaged_gradient(problem, w, next_batch(plan)),
                        lr_global,
                    )
                    loss = metrics.loss
                    lr_scale = metrics.lr_scale
                    lr_effective = metrics.alpha
                    beta_raw = metrics.beta_raw
                    beta_clamped = metrics.beta_clamped
                    grad_norm = metrics.grad_norm
                else:
                    weights, fo_state = step_fn(fo_state, weights, ev.gradient, lr_global)
                    ev = averaged_gradient(problem, weights, next_batch(plan))
                    loss = ev.loss
                    lr_scale = 1.0
                    lr_effective = lr_global
                    beta_raw = None
                    beta_clamped = None
                    grad_norm = norm(ev.gradient)
            except NumericError:
                diverged = True
                break

            train_acc = None
            test_acc = None
            due = t == t_max or (config.eval_every > 0 and t % config.eval_every == 0)
            if is_classification and due:
                train_acc = accuracy(problem, weights, train_ds)
                if test_ds is not None:
                    test_acc = accuracy(problem, weights, test_ds)
                tracked = test_acc if test_ds is not None else train_acc
                if best_acc is None or tracked > best_acc:
                    best_acc = tracked

            wall_ms = (time.perf_counter() - started) * 1e3
            if writer is not None:
                writer.writerow(
                    [
                        str(t),
                        str((t - 1) // sched.steps_per_epoch),
                        _cell(loss),
                        _cell(lr_global),
                        _cell(lr_scale),
                        _cell(lr_effective),
                        _cell(beta_raw),
                        _cell(beta_clamped),
                        _cell(grad_norm),
                        _cell(wall_ms),
                        _cell(train_acc),
                        _cell(test_acc),
                    ]
                )
                fh.flush()
            steps_logged = t
            final_loss = loss
            if train_acc is not None:
                final_train_acc = train_acc
            if test_acc is not None:
                final_test_acc = test_acc
    finally:
        if fh is not None:
            fh.close()

    return RunResult(
        optimizer=config.optimizer,
        csv_path=csv_path,
        steps_logged=steps_logged,
        final_loss=final_loss,
        final_train_accuracy=final_train_acc,
        final_test_accuracy=final_test_acc,
        best_accuracy=best_acc,
        diverged=diverged,
        final_weights=weights,
        config=config,
    )


def read_run_csv(path: str) -> dict[str, list[float | None]]:
    """Read a run or summary CSV back into per-column lists.

    Empty cells become None, numeric cells become floats, and anything
    else stays a string (summary CSVs have a text optimizer column).  A
    file truncated at a row boundary reads back as the surviving prefix.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        columns: dict[str, list] = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                if cell == "":
                    columns[name].append(None)
                else:
                    try:
                        columns[name].append(float(cell))
                    except ValueError:
                        columns[name].append(cell)
    return columns


SWEEP_STAT_COLUMNS = [
    "runs",
    "diverged",
    "failed",
    "final_loss_mean",
    "final_loss_std",
    "final_accuracy_mean",
    "final_accuracy_std",
]


def _apply_axis(config: RunConfig, axis: str, value: str) -> RunConfig:
    if axis == "batch_size":
        effective = int(value)
        if effective % config.virtual_factor != 0:
            raise ConfigError(
                f"batch_size {effective} is not divisible by virtual_factor "
                f"{config.virtual_factor}"
            )
        return replace(config, micro_batch_size=effective // config.virtual_factor)
    if axis not in CONFIG_PARSERS:
        raise ConfigError(f"unknown sweep axis '{axis}'")
    try:
        parsed = CONFIG_PARSERS[axis](value)
    except ValueError as exc:
        raise ConfigError(f"bad value {value!r} for axis '{axis}': {exc}") from exc
    return replace(config, **{axis: parsed})


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def sweep(
    base: RunConfig,
    axis: str,
    values: list[str],
    optimizers: list[str],
    seeds: list[int],
    out_dir: str = ".",
) -> str:
    """Cross product of optimizers x axis values x seeds; one CSV per run.

    Writes `summary.csv` in `out_dir` with per-(optimizer, value) means and
    population standard deviations of the final loss and final accuracy
    over completed runs; diverged and failed runs are counted but excluded
    from the statistics.  Returns the summary path.
    """
    if axis != "batch_size" and axis not in CONFIG_PARSERS:
        raise ConfigError(f"unknown sweep axis '{axis}'")
    os.makedirs(out_dir, exist_ok=True)
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["optimizer", axis, *SWEEP_STAT_COLUMNS])
        for optimizer in optimizers:
            for value in values:
                losses: list[float] = []
                accs: list[float] = []
                n_runs = 0
                n_diverged = 0
                n_failed = 0
                for seed in seeds:
                    n_runs += 1
                    try:
                        cfg = _apply_axis(base, axis, value)
                        cfg = replace(
                            cfg,
                            optimizer=optimizer,
                            seed=seed,
                            run_name=f"{optimizer}_{axis}{value}_seed{seed}",
                        )
                        result = run(cfg, out_dir=out_dir)
                    except (ConfigError, OSError) as exc:
                        n_failed += 1
                        print(f"sweep: {optimizer} {axis}={value} seed={seed} failed: {exc}")
                        continue
                    if result.diverged:
                        n_diverged += 1
                        continue
                    losses.append(result.final_loss)
                    final_acc = (
                        result.final_test_accuracy
                        if result.final_test_accuracy is not None
                        else result.final_train_accuracy
                    )
                    if final_acc is not None:
                        accs.append(final_acc)
                loss_mean, loss_std = _mean_std(losses)
                acc_mean, acc_std = _mean_std(accs)
                writer.writerow(
                    [
                        optimizer,
                        value,
                        str(n_runs),
                        str(n_diverged),
                        str(n_failed),
                        _cell(loss_mean),
                        _cell(loss_std),
                        _cell(acc_mean),
                        _cell(acc_std),
                    ]
                )
                fh.flush()
    return summary_path
