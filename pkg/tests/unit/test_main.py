# pylint: disable=unused-argument
"""
Unit tests for the command-line entry point.

This module runs the subcommands on small configurations and checks the
files they write and the exit codes they return.
"""

import pandas as pd
import pytest

from app.core.exception_handling.error_handler import (
    EXIT_OK,
    EXIT_RUNTIME_FAILURE,
    EXIT_USAGE_ERROR,
    DivergedSimulationError,
)
from app.main import DATA_FILE, EVALUATION_FILE, build_parser, main
from app.services.experiments.training import CHECKPOINT_FILE, METRICS_FILE

TINY_RUN = """
experiment = "ou_recovery"
master_seed = 3
n_data_trajs = 16
n_gen_trajs = 8
n_data_batch = 8
runs = 2

[protocol]
kind = "full_traj"
tau = 2.0e-3

[kernel]
length_scale = 0.1

[optim]
epochs = 3

[sweep]
protocols = ["full_traj", "conditionals"]
taus = [2.0e-3, 6.0e-3]
"""


@pytest.fixture
def run_file(tmp_path):
    """Small OU run configuration on disk."""
    path = tmp_path / "run.toml"
    path.write_text(TINY_RUN, encoding="utf-8")
    return path


class TestParser:
    """Tests for the argument parser."""

    def test_subcommands(self):
        """Test every subcommand takes the common options."""
        parser = build_parser()
        for command in ("generate", "train", "evaluate", "sweep"):
            args = parser.parse_args([command, "--config", "run.toml", "--seed", "4"])
            assert args.command == command
            assert args.seed == 4

    def test_config_required(self):
        """Test --config is mandatory."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train"])


class TestMain:
    """Tests for main."""

    def test_generate_then_train_then_evaluate(self, run_file, tmp_path, capsys):
        """Test the generate, train and evaluate pipeline."""
        out = tmp_path / "out"
        common = ["--config", str(run_file), "--output", str(out), "--workers", "2"]

        assert main(["generate", *common]) == EXIT_OK
        assert (out / DATA_FILE).exists()

        assert main(["train", *common, "--data", str(out / DATA_FILE)]) == EXIT_OK
        metrics = pd.read_csv(out / METRICS_FILE)
        assert list(metrics["epoch"]) == [0, 1, 2]
        assert (out / CHECKPOINT_FILE).exists()

        assert main(["evaluate", *common]) == EXIT_OK
        table = pd.read_csv(out / EVALUATION_FILE)
        assert set(table["metric"]) == {"eps_rel_stiffness", "eps_rel_gamma", "eps_rel_kbt"}
        assert "eps_rel_gamma" in capsys.readouterr().out

    def test_training_is_reproducible(self, run_file, tmp_path):
        """Test two runs with the same seed write identical metrics."""
        for name in ("a", "b"):
            args = ["train", "--config", str(run_file), "--output", str(tmp_path / name)]
            assert main(args) == EXIT_OK
        assert (tmp_path / "a" / METRICS_FILE).read_bytes() == (
            tmp_path / "b" / METRICS_FILE
        ).read_bytes()

    def test_sweep(self, run_file, tmp_path, mocker):
        """Test the sweep writes raw and aggregate tables."""
        mocker.patch(
            "app.services.experiments.sweep.run_training",
            side_effect=lambda cell, **_: mocker.Mock(final_params=cell.trainee_params()),
        )
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(run_file), "--output", str(out)]) == EXIT_OK
        raw = pd.read_csv(out / "sweep_raw.csv")
        assert len(raw) == 2 * 2 * 2 * 3
        assert (out / "sweep_eps_rel_gamma.csv").exists()

    def test_missing_config(self, tmp_path):
        """Test an unreadable configuration exits with 2."""
        assert main(["train", "--config", str(tmp_path / "absent.toml")]) == EXIT_USAGE_ERROR

    def test_invalid_config(self, tmp_path):
        """Test an invalid configuration exits with 2."""
        path = tmp_path / "bad.toml"
        path.write_text('[protocol]\ntau = 1.5e-3\n', encoding="utf-8")
        assert main(["generate", "--config", str(path)]) == EXIT_USAGE_ERROR

    def test_tau_beyond_horizon(self, tmp_path):
        """Test a full_traj tau longer than the horizon exits with 2."""
        path = tmp_path / "bad.toml"
        path.write_text(
            '[model]\nn_steps = 18\n[protocol]\nkind = "full_traj"\ntau = 2.0e-2\n',
            encoding="utf-8",
        )
        assert main(["train", "--config", str(path)]) == EXIT_USAGE_ERROR

    def test_missing_checkpoint(self, run_file, tmp_path):
        """Test evaluating without a checkpoint exits with 2."""
        args = ["evaluate", "--config", str(run_file), "--output", str(tmp_path / "empty")]
        assert main(args) == EXIT_USAGE_ERROR

    def test_runtime_failure(self, run_file, tmp_path, mocker):
        """Test a numerical failure exits with 1."""
        mocker.patch("app.main.run_training", side_effect=DivergedSimulationError(step=3))
        args = ["train", "--config", str(run_file), "--output", str(tmp_path)]
        assert main(args) == EXIT_RUNTIME_FAILURE
