"""Unit tests for trajectory records and their CSV format."""

import numpy as np
import pandas as pd
import pytest

from app.core.exception_handling.error_handler import InvalidArgumentError
from app.services.integrators.farago import simulate
from app.services.integrators.trajectory import read_trajectories, write_trajectories


class TestTrajectoryIO:
    """Tests for write_trajectories and read_trajectories."""

    def test_csv_layout(self, ou_trajs, tmp_path):
        """Test the columns and row count of the CSV."""
        path = write_trajectories(ou_trajs, tmp_path / "data.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["sample_id", "step", "t", "x1", "x2", "x3"]
        assert len(frame) == 8 * 19
        assert (tmp_path / "data.noise.npz").exists()

    def test_read_back_replays(self, ou_params, ou_trajs, tmp_path):
        """Test stored positions and noise reproduce the simulation exactly."""
        write_trajectories(ou_trajs, tmp_path / "data.csv")
        loaded = read_trajectories(tmp_path / "data.csv")
        assert [t.sample_id for t in loaded] == list(range(8))
        for original, restored in zip(ou_trajs, loaded):
            np.testing.assert_array_equal(original.values, restored.values)
            replay = simulate(ou_params, restored.values[:2], restored.noise)
            np.testing.assert_array_equal(replay.values, original.values)
            assert restored.dt == ou_params.dt

    def test_empty_rejected(self, tmp_path):
        """Test writing nothing is an error."""
        with pytest.raises(InvalidArgumentError):
            write_trajectories([], tmp_path / "data.csv")
