"""
Unit tests for the training loop and checkpoints.
"""

import numpy as np
import pytest

from app.core.concurrency.workers import WorkerPool
from app.core.exception_handling.error_handler import ConfigurationError, OptimizerHaltError
from app.services.experiments.data import generate_training_data
from app.services.experiments.training import (
    CHECKPOINT_FILE,
    METRICS_FILE,
    _EpochBatches,
    read_checkpoint,
    run_training,
)
from app.services.protocols.fragments import extract_fragments
from tests.conftest import make_trajs
from tests.unit.services.experiments.conftest import tiny_config


class TestRunTraining:
    """Tests for run_training."""

    def test_outputs(self, tiny_cfg, tmp_path):
        """Test one metrics row per epoch and a final checkpoint."""
        record = run_training(tiny_cfg, output_dir=tmp_path)
        assert record.epochs == [0, 1, 2, 3]
        assert np.all(np.isfinite(record.losses))
        frame = record.to_frame()
        assert list(frame.columns) == ["epoch", "loss", "stiffness", "gamma", "kbt"]
        assert (tmp_path / METRICS_FILE).read_text().count("\n") == 5
        checkpoint = read_checkpoint(tmp_path / CHECKPOINT_FILE)
        assert checkpoint.epoch == 3
        assert checkpoint.optimizer.step_count == 4
        learned = checkpoint.to_params(tiny_cfg.trainee_params())
        assert learned.gamma == pytest.approx(record.final_params.gamma, rel=1e-15)

    def test_parameters_move_from_start(self, tiny_cfg):
        """Test the trainee leaves its starting point."""
        record = run_training(tiny_cfg)
        start = tiny_cfg.trainee_params()
        assert record.params[0]["stiffness"] == pytest.approx(start.stiffness)
        assert record.final_params.stiffness != start.stiffness
        assert set(record.relative_errors) == {"stiffness", "gamma", "kbt"}

    def test_reproducible_files(self, tiny_cfg, tmp_path):
        """Test the same seed writes byte-identical metrics for any worker count."""
        run_training(tiny_cfg, output_dir=tmp_path / "a", pool=WorkerPool(1))
        run_training(tiny_cfg, output_dir=tmp_path / "b", pool=WorkerPool(3))
        assert (tmp_path / "a" / METRICS_FILE).read_bytes() == (
            tmp_path / "b" / METRICS_FILE
        ).read_bytes()

    def test_seed_changes_history(self, tiny_cfg):
        """Test a different master seed gives a different loss history."""
        first = run_training(tiny_cfg)
        second = run_training(tiny_cfg.with_seed(4))
        assert first.losses != second.losses

    def test_conditionals(self):
        """Test conditionals runs simulate noise_per_seed copies per data pick."""
        cfg = tiny_config(
            n_data_batch=4,
            protocol={
                "kind": "conditionals",
                "tau": 2e-3,
                "frag_len": 3,
                "n_fragments": 2,
                "noise_per_seed": 2,
            },
        )
        record = run_training(cfg)
        assert len(record.losses) == 4
        assert np.all(np.isfinite(record.losses))

    def test_given_data_is_used(self, tiny_cfg, ou_params, rng):
        """Test trajectories passed in replace the generated ones."""
        data = make_trajs(ou_params, rng, 16)
        assert run_training(tiny_cfg, data=data).losses != run_training(tiny_cfg).losses

    def test_halts_on_non_finite_gradient(self, tiny_cfg, mocker):
        """Test a NaN gradient stops training with the channel name."""
        mocker.patch(
            "app.services.experiments.training.mmd2_grad",
            return_value=np.array([0.0, np.nan, 0.0]),
        )
        with pytest.raises(OptimizerHaltError) as exc:
            run_training(tiny_cfg)
        assert exc.value.details == {"channel": "gamma", "epoch": 0}

    def test_force_law_run(self, tiny_force_cfg):
        """Test a short network training run."""
        record = run_training(tiny_force_cfg)
        assert np.all(np.isfinite(record.losses))
        assert record.relative_errors == {}
        assert not np.array_equal(
            record.final_params.neural_weights, tiny_force_cfg.trainee_params().neural_weights
        )


class TestCheckpoint:
    """Tests for checkpoint files."""

    def test_missing(self, tmp_path):
        """Test a missing checkpoint is a configuration error."""
        with pytest.raises(ConfigurationError):
            read_checkpoint(tmp_path / "absent.json")

    def test_malformed(self, tmp_path):
        """Test an invalid checkpoint is a configuration error."""
        path = tmp_path / "bad.json"
        path.write_text('{"epoch": "x"}', encoding="utf-8")
        with pytest.raises(ConfigurationError):
            read_checkpoint(path)


class TestEpochBatches:
    """Tests for the per-epoch observed batch and generator seeds."""

    @staticmethod
    def _batches(cfg):
        pool = extract_fragments(generate_training_data(cfg), cfg.protocol)
        return _EpochBatches(cfg, pool)

    def test_seeds_paired_with_observed_rows(self):
        """Test each drawn row seeds noise_per_seed consecutive generator starts."""
        cfg = tiny_config(
            n_gen_trajs=8,
            n_data_batch=4,
            protocol={"kind": "full_traj", "tau": 2e-3, "noise_per_seed": 2},
        )
        data_batch, starts = self._batches(cfg).draw(0)
        assert len(starts) == 8
        dim = data_batch.dim
        for i, (x0, x1) in enumerate(starts):
            row = data_batch.fragments[i // 2]
            np.testing.assert_array_equal(x0, row[:dim])
            np.testing.assert_array_equal(x1, row[dim : 2 * dim])

    def test_seed_rows_cycle(self):
        """Test more seed pairs than observed rows reuse the rows in order."""
        cfg = tiny_config(n_gen_trajs=8, n_data_batch=3)
        batches = self._batches(cfg)
        rows = batches.seed_rows(np.array([5, 1, 9]))
        np.testing.assert_array_equal(rows, [5, 1, 9, 5, 1, 9, 5, 1])

    def test_noise_per_seed_must_divide(self):
        """Test the generator count is a whole number of noise copies."""
        with pytest.raises(ValueError):
            tiny_config(
                n_gen_trajs=6,
                protocol={"kind": "full_traj", "tau": 2e-3, "noise_per_seed": 4},
            )
