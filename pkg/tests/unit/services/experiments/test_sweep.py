"""
Unit tests for sweeps and their summary tables.
"""

import numpy as np
import pandas as pd
import pytest

from app.core.exception_handling.error_handler import ConfigurationError, InvalidArgumentError
from app.services.experiments.evaluation import EvaluationRecord
from app.services.experiments.sweep import (
    RAW_COLUMNS,
    RAW_FILE,
    aggregate_sweep,
    protocol_ordering_report,
    run_sweep,
    sweep_config,
    write_sweep_tables,
)
from app.services.experiments.training import MetricsRecord


def _raw(values_by_cell):
    rows = []
    for (method, tau), values in values_by_cell.items():
        for run, value in enumerate(values):
            rows.append(
                {"method": method, "tau": tau, "run": run, "metric": "eps_rel_gamma", "value": value}
            )
    return pd.DataFrame(rows, columns=RAW_COLUMNS)


class TestSweepConfig:
    """Tests for sweep_config."""

    def test_cell(self, tiny_cfg):
        """Test a cell sets the protocol and offsets the seed by the run."""
        cell = sweep_config(tiny_cfg, "marginals", 4e-3, 2)
        assert cell.protocol.kind == "marginals"
        assert cell.protocol.tau == 4e-3
        assert cell.master_seed == tiny_cfg.master_seed + 2

    def test_invalid_cell(self, tiny_cfg):
        """Test a tau beyond the horizon is a configuration error."""
        with pytest.raises(ConfigurationError):
            sweep_config(tiny_cfg, "full_traj", 2e-2, 0)


class TestRunSweep:
    """Tests for run_sweep with training and evaluation stubbed."""

    def test_grid(self, tiny_cfg, mocker):
        """Test one raw row per cell, run and metric, with per-run seeds."""
        mocker.patch("app.services.experiments.sweep.generate_training_data", return_value=[])
        train = mocker.patch(
            "app.services.experiments.sweep.run_training",
            return_value=MetricsRecord(final_params=tiny_cfg.target_params()),
        )
        mocker.patch(
            "app.services.experiments.sweep.evaluate_run",
            return_value=EvaluationRecord(relative_errors={"gamma": 0.1, "kbt": 0.2}),
        )
        raw = run_sweep(
            tiny_cfg, methods=["full_traj", "conditionals"], taus=[2e-3, 4e-3, 6e-3], runs=3
        )
        assert list(raw.columns) == RAW_COLUMNS
        assert len(raw) == 2 * 3 * 3 * 2
        seeds = sorted({call.args[0].master_seed for call in train.call_args_list})
        assert seeds == [3, 4, 5]


class TestAggregateSweep:
    """Tests for aggregate_sweep."""

    def test_matches_hand_statistics(self, rng):
        """Test means and sample standard deviations of an 18-row table."""
        cells = {
            (method, tau): rng.uniform(0.0, 1.0, 3)
            for method in ("full_traj", "conditionals")
            for tau in (2e-3, 4e-3, 6e-3)
        }
        table = aggregate_sweep(_raw(cells))["eps_rel_gamma"]
        assert len(table) == 6
        for row in table.itertuples():
            values = cells[(row.method, row.tau)]
            assert row.mean == pytest.approx(np.mean(values), rel=1e-14)
            assert row.std == pytest.approx(np.std(values, ddof=1), rel=1e-12)

    def test_write_tables(self, tmp_path):
        """Test the raw CSV and one file per metric are written."""
        raw = _raw({("full_traj", 2e-3): [0.1, 0.2]})
        write_sweep_tables(raw, aggregate_sweep(raw), tmp_path)
        assert (tmp_path / RAW_FILE).exists()
        table = pd.read_csv(tmp_path / "sweep_eps_rel_gamma.csv")
        assert list(table.columns) == ["method", "tau", "mean", "std"]


class TestOrderingReport:
    """Tests for protocol_ordering_report."""

    def test_holds(self):
        """Test medians within 3x of conditionals."""
        raw = _raw(
            {
                ("conditionals", 2e-3): [0.1, 0.2, 0.3],
                ("full_traj", 2e-3): [0.5, 0.6, 0.1],
                ("marginals", 2e-3): [0.2, 0.2, 0.2],
            }
        )
        report = protocol_ordering_report(raw, "eps_rel_gamma", 2e-3)
        assert report.medians == pytest.approx(
            {"conditionals": 0.2, "full_traj": 0.5, "marginals": 0.2}
        )
        assert report.holds

    def test_violated(self):
        """Test a median over 3x conditionals is reported, not raised."""
        raw = _raw({("conditionals", 2e-3): [0.1], ("full_traj", 2e-3): [0.31]})
        assert not protocol_ordering_report(raw, "eps_rel_gamma", 2e-3).holds

    def test_needs_conditionals(self):
        """Test the report requires conditionals runs."""
        raw = _raw({("full_traj", 2e-3): [0.1]})
        with pytest.raises(InvalidArgumentError):
            protocol_ordering_report(raw, "eps_rel_gamma", 2e-3)
