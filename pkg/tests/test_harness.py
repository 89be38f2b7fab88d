"""Tests for the experiment harness.

Config parsing with line-numbered errors, run determinism, divergence
handling, CSV layout and round-tripping, the step/epoch accounting,
line-search auto-disable, and sweep summaries.
"""

import csv
import math
import os

import numpy as np
import pytest

from nlcgbench.errors import ConfigError
from nlcgbench.harness import (
    RUN_COLUMNS,
    RunConfig,
    build_linesearch_config,
    build_plan,
    build_schedule,
    load_config,
    parse_config_text,
    read_run_csv,
    run,
    sweep,
    validate_config,
)
from nlcgbench.problems import make_quadratic


def quadratic_config(**overrides):
    """A fast deterministic 1-D quadratic run with a constant 0.1 rate."""
    base = dict(
        problem="quadratic",
        quadratic_dim=1,
        quadratic_condition=1.0,
        quadratic_min_eigenvalue=4.0,
        optimizer="sgd",
        micro_batch_size=64,
        base_lr=0.4,  # peak = 0.4 * 64 / 256 = 0.1
        initial_lr=0.1,
        final_lr=0.1,
        warmup_epochs=0.0,
        decay_interval_epochs=2.0,
        epochs=30.0,
        seed=0,
    )
    base.update(overrides)
    return RunConfig(**base)


def csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfigParsing:
    def test_round_trip(self):
        text = """
        # comment line
        problem = quadratic
        optimizer = momentum   # trailing comment
        micro_batch_size = 128
        momentum_coeff = 0.85
        ls_enabled = false
        hidden_layers = 16, 8
        """
        cfg = parse_config_text(text)
        assert cfg.problem == "quadratic"
        assert cfg.optimizer == "momentum"
        assert cfg.micro_batch_size == 128
        assert cfg.momentum_coeff == 0.85
        assert cfg.ls_enabled is False
        assert cfg.hidden_layers == (16, 8)

    def test_unknown_key_rejected_with_line(self):
        with pytest.raises(ConfigError, match="line 2.*unknown key"):
            parse_config_text("problem = mlp\nlearning_rate = 0.1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_config_text("seed = 1\nseed = 2\n")

    def test_bad_value_rejected_with_line(self):
        with pytest.raises(ConfigError, match="line 1.*bad value"):
            parse_config_text("micro_batch_size = many\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_text("just some words\n")

    def test_load_config_names_the_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("bogus_key = 1\n")
        with pytest.raises(ConfigError, match="run.cfg"):
            load_config(str(p))

    def test_unknown_optimizer_rejected(self):
        with pytest.raises(ConfigError, match="optimizer"):
            parse_config_text("optimizer = adam\n")

    def test_mlp_needs_hidden_layers(self):
        with pytest.raises(ConfigError, match="hidden layer"):
            validate_config(RunConfig(problem="mlp", hidden_layers=()))

    def test_zero_step_config_rejected(self, tmp_path):
        cfg = quadratic_config(epochs=0.5)  # steps_per_epoch = 1 -> 0 steps
        with pytest.raises(ConfigError, match="zero training steps"):
            run(cfg, out_dir=str(tmp_path))


class TestRunOnQuadratic:
    def test_sgd_contracts_monotonically(self, tmp_path):
        """Constant rate 0.1 on curvature 4 contracts the loss gap by
        (1 - 0.4)^2 per step: the logged losses decrease monotonically and
        the final gap is below 1e-10."""
        cfg = quadratic_config()
        result = run(cfg, out_dir=str(tmp_path))
        assert not result.diverged
        assert result.steps_logged == 30
        cols = read_run_csv(result.csv_path)
        losses = cols["train_loss"]
        assert all(b < a for a, b in zip(losses, losses[1:]))
        prob = make_quadratic(1, 1.0, seed=cfg.data_seed, min_eigenvalue=4.0)
        loss_min = prob.evaluate(prob.optimum()).loss
        assert losses[-1] - loss_min <= 1e-10
        np.testing.assert_allclose(result.final_loss, losses[-1], rtol=0)

    def test_divergence_is_data_not_a_crash(self, tmp_path):
        """An absurd rate blows the run up; the result is flagged diverged
        and the CSV written so far still parses."""
        cfg = quadratic_config(
            base_lr=1000.0, initial_lr=250.0, final_lr=250.0, epochs=200.0
        )
        result = run(cfg, out_dir=str(tmp_path))
        assert result.diverged
        assert 0 < result.steps_logged < 200
        cols = read_run_csv(result.csv_path)
        assert len(cols["train_loss"]) == result.steps_logged
        assert all(math.isfinite(x) for x in cols["train_loss"])

    def test_epoch_accounting(self, tmp_path):
        """Logged steps = floor(epochs * steps_per_epoch); the epoch column
        increments every steps_per_epoch rows."""
        cfg = quadratic_config(
            quadratic_dim=1,
            micro_batch_size=16,
            virtual_factor=2,
            base_lr=0.8,
            epochs=3.0,
        )
        # Quadratic plans take one step per epoch regardless of batch size.
        result = run(cfg, out_dir=str(tmp_path))
        assert result.steps_logged == 3
        cols = read_run_csv(result.csv_path)
        assert cols["epoch"] == [0.0, 1.0, 2.0]
        assert cols["step"] == [1.0, 2.0, 3.0]

    def test_fractional_epochs_floor(self, tmp_path):
        cfg = quadratic_config(epochs=7.8)
        result = run(cfg, out_dir=str(tmp_path))
        assert result.steps_logged == 7


class TestCsvContract:
    def test_header_and_cell_formats(self, tmp_path):
        cfg = quadratic_config(epochs=3.0)
        result = run(cfg, out_dir=str(tmp_path))
        rows = csv_rows(result.csv_path)
        assert rows[0] == RUN_COLUMNS
        # 17-significant-digit cells round-trip to the exact float.
        assert float(rows[-1][2]) == result.final_loss
        # Quadratic runs have no accuracy; first-order runs no betas.
        last = dict(zip(RUN_COLUMNS, rows[-1]))
        assert last["beta_raw"] == "" and last["beta_clamped"] == ""
        assert last["train_accuracy"] == "" and last["test_accuracy"] == ""

    def test_determinism_modulo_wall_ms(self, tmp_path):
        """Two runs of one config differ only in the wall_ms column."""
        cfg = quadratic_config(optimizer="nlcg_fr", run_name="det_a")
        ra = run(cfg, out_dir=str(tmp_path))
        rb = run(
            quadratic_config(optimizer="nlcg_fr", run_name="det_b"),
            out_dir=str(tmp_path),
        )
        rows_a, rows_b = csv_rows(ra.csv_path), csv_rows(rb.csv_path)
        assert len(rows_a) == len(rows_b)
        wall_idx = RUN_COLUMNS.index("wall_ms")
        for row_a, row_b in zip(rows_a, rows_b):
            masked_a = row_a[:wall_idx] + row_a[wall_idx + 1 :]
            masked_b = row_b[:wall_idx] + row_b[wall_idx + 1 :]
            assert masked_a == masked_b

    def test_truncated_csv_parses(self, tmp_path):
        cfg = quadratic_config(epochs=10.0)
        result = run(cfg, out_dir=str(tmp_path))
        text = open(result.csv_path).read()
        lines = text.splitlines(keepends=True)
        truncated = tmp_path / "truncated.csv"
        truncated.write_text("".join(lines[:4]))  # header + 3 rows
        cols = read_run_csv(str(truncated))
        assert len(cols["train_loss"]) == 3

    def test_empty_csv_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(ConfigError, match="empty"):
            read_run_csv(str(p))

    def test_write_csv_false_skips_file(self, tmp_path):
        cfg = quadratic_config(epochs=2.0)
        result = run(cfg, out_dir=str(tmp_path), write_csv=False)
        assert result.csv_path is None
        assert result.steps_logged == 2


class TestClassificationRuns:
    def test_accuracy_cadence_and_best(self, tmp_path):
        """Accuracy columns fill every eval_every steps and on the final
        step; other rows leave them empty."""
        cfg = RunConfig(
            problem="mlp",
            hidden_layers=(8,),
            num_samples=240,
            feature_dim=4,
            num_classes=3,
            separation=2.0,
            test_fraction=0.25,
            optimizer="momentum",
            micro_batch_size=30,
            epochs=2.0,  # 180 train samples / 30 = 6 steps per epoch
            eval_every=5,
            warmup_epochs=0.5,
            decay_interval_epochs=0.5,
            seed=1,
        )
        result = run(cfg, out_dir=str(tmp_path))
        assert result.steps_logged == 12
        cols = read_run_csv(result.csv_path)
        filled = [i + 1 for i, v in enumerate(cols["train_accuracy"]) if v is not None]
        assert filled == [5, 10, 12]
        test_filled = [i + 1 for i, v in enumerate(cols["test_accuracy"]) if v is not None]
        assert test_filled == [5, 10, 12]
        assert result.best_accuracy == max(
            v for v in cols["test_accuracy"] if v is not None
        )
        assert result.final_train_accuracy == cols["train_accuracy"][-1]

    def test_no_eval_every_still_scores_final_step(self, tmp_path):
        cfg = RunConfig(
            problem="logistic_regression",
            num_samples=64,
            feature_dim=3,
            num_classes=2,
            separation=2.0,
            optimizer="sgd",
            micro_batch_size=32,
            epochs=2.0,
            warmup_epochs=0.5,
            decay_interval_epochs=0.5,
            seed=2,
        )
        result = run(cfg, out_dir=str(tmp_path))
        cols = read_run_csv(result.csv_path)
        assert cols["train_accuracy"][-1] is not None
        assert all(v is None for v in cols["train_accuracy"][:-1])


class TestLineSearchWiring:
    def test_auto_disable_below_threshold(self):
        cfg = RunConfig(micro_batch_size=64)
        ls = build_linesearch_config(cfg, effective_batch=64)
        assert ls.enabled is False

    def test_enabled_at_threshold(self):
        cfg = RunConfig(micro_batch_size=2048)
        ls = build_linesearch_config(cfg, effective_batch=2048)
        assert ls.enabled is True

    def test_threshold_scales_with_regime(self):
        cfg = RunConfig(regime_scale=1.0 / 256.0)
        assert build_linesearch_config(cfg, effective_batch=8).enabled is True
        assert build_linesearch_config(cfg, effective_batch=4).enabled is False

    def test_explicit_disable_wins(self):
        cfg = RunConfig(ls_enabled=False)
        assert build_linesearch_config(cfg, effective_batch=4096).enabled is False

    def test_scale_column_constant_when_disabled(self, tmp_path):
        cfg = quadratic_config(optimizer="nlcg_fr", epochs=5.0)
        result = run(cfg, out_dir=str(tmp_path))
        cols = read_run_csv(result.csv_path)
        assert set(cols["lr_scale"]) == {1.0}


class TestScheduleParity:
    def test_lr_global_identical_across_optimizers(self, tmp_path):
        """The logged lr_global column is byte-identical across optimizers
        under one config."""
        texts = []
        for optimizer in ("sgd", "momentum", "rmsprop", "nlcg_fr", "nlcg_pr"):
            cfg = quadratic_config(optimizer=optimizer, run_name=f"par_{optimizer}")
            result = run(cfg, out_dir=str(tmp_path))
            rows = csv_rows(result.csv_path)
            idx = RUN_COLUMNS.index("lr_global")
            texts.append([row[idx] for row in rows[1:]])
        for other in texts[1:]:
            assert other == texts[0]


class TestSweep:
    def test_grid_files_and_summary(self, tmp_path):
        """2 optimizers x 2 batch sizes x 2 seeds: 8 run CSVs + summary."""
        base = quadratic_config(epochs=4.0)
        summary_path = sweep(
            base,
            axis="batch_size",
            values=["64", "128"],
            optimizers=["sgd", "momentum"],
            seeds=[0, 1],
            out_dir=str(tmp_path),
        )
        run_files = [f for f in os.listdir(tmp_path) if f != "summary.csv"]
        assert len(run_files) == 8
        rows = csv_rows(summary_path)
        assert rows[0][:2] == ["optimizer", "batch_size"]
        assert len(rows) == 1 + 4  # header + one row per (optimizer, value)
        for row in rows[1:]:
            assert row[2] == "2"  # runs per point
            assert row[3] == "0"  # diverged
            assert row[4] == "0"  # failed

    def test_summary_mean_matches_run_logs(self, tmp_path):
        """The summary's final-loss mean equals recomputing it from the
        individual run CSVs."""
        base = quadratic_config(epochs=4.0)
        summary_path = sweep(
            base,
            axis="batch_size",
            values=["64"],
            optimizers=["sgd"],
            seeds=[0, 1, 2],
            out_dir=str(tmp_path),
        )
        finals = []
        for seed in (0, 1, 2):
            cols = read_run_csv(str(tmp_path / f"sgd_batch_size64_seed{seed}.csv"))
            finals.append(cols["train_loss"][-1])
        summary = read_run_csv(summary_path)
        np.testing.assert_allclose(
            summary["final_loss_mean"][0], np.mean(finals), rtol=1e-15
        )
        np.testing.assert_allclose(
            summary["final_loss_std"][0], np.std(finals), rtol=1e-12, atol=1e-17
        )

    def test_duplicate_seeds_zero_stddev(self, tmp_path):
        """Identical-seed duplicates produce identical finals: stddev 0."""
        base = quadratic_config(epochs=4.0)
        summary_path = sweep(
            base,
            axis="epochs",
            values=["4"],
            optimizers=["sgd"],
            seeds=[5, 5],
            out_dir=str(tmp_path),
        )
        summary = read_run_csv(summary_path)
        assert summary["final_loss_std"][0] == 0.0

    def test_diverged_runs_counted_not_averaged(self, tmp_path):
        base = quadratic_config(
            base_lr=1000.0, initial_lr=250.0, final_lr=250.0, epochs=150.0
        )
        summary_path = sweep(
            base,
            axis="batch_size",
            values=["64"],
            optimizers=["sgd"],
            seeds=[0, 1],
            out_dir=str(tmp_path),
        )
        summary = read_run_csv(summary_path)
        assert summary["diverged"][0] == 2.0
        assert summary["final_loss_mean"][0] is None

    def test_invalid_axis_value_counts_as_failed(self, tmp_path):
        """batch_size not divisible by virtual_factor fails that grid point
        but the sweep completes."""
        base = quadratic_config(virtual_factor=2, micro_batch_size=32, epochs=4.0)
        summary_path = sweep(
            base,
            axis="batch_size",
            values=["63"],
            optimizers=["sgd"],
            seeds=[0],
            out_dir=str(tmp_path),
        )
        summary = read_run_csv(summary_path)
        assert summary["failed"][0] == 1.0

    def test_unknown_axis_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="axis"):
            sweep(
                quadratic_config(),
                axis="flux",
                values=["1"],
                optimizers=["sgd"],
                seeds=[0],
                out_dir=str(tmp_path),
            )


class TestBuilders:
    def test_build_plan_for_quadratic_is_one_step_per_epoch(self):
        cfg = quadratic_config(micro_batch_size=32, virtual_factor=4)
        plan = build_plan(cfg, None)
        assert plan.dataset_size == 128
        assert plan.steps_per_epoch == 1

    def test_build_schedule_uses_regime_defaults(self):
        cfg = RunConfig(final_lr=-1.0, warmup_epochs=-1.0, epochs=40.0)
        sched = build_schedule(cfg, effective_batch=16384, steps_per_epoch=10)
        assert sched.warmup_epochs == 15.0
        assert sched.final_lr == 0.01

    def test_build_schedule_honors_explicit_values(self):
        cfg = RunConfig(final_lr=0.002, warmup_epochs=1.0, epochs=40.0)
        sched = build_schedule(cfg, effective_batch=16384, steps_per_epoch=10)
        assert sched.warmup_epochs == 1.0
        assert sched.final_lr == 0.002
