"""Small run configurations for the experiment tests."""

import pytest

from app.core.configuration.run_config import RunConfig


def tiny_config(**overrides) -> RunConfig:
    """OU run small enough to train in a fraction of a second."""
    raw = {
        "experiment": "ou_recovery",
        "master_seed": 3,
        "n_data_trajs": 16,
        "n_gen_trajs": 8,
        "n_data_batch": 8,
        "checkpoint_every": 2,
        "protocol": {"kind": "full_traj", "tau": 2e-3},
        "kernel": {"length_scale": 0.1},
        "optim": {"epochs": 4, "lr": 1e-2},
    }
    raw.update(overrides)
    return RunConfig.model_validate(raw)


def tiny_force_law_config(**overrides) -> RunConfig:
    """Double-well target with a small network trainee."""
    raw = {
        "experiment": "force_law",
        "master_seed": 5,
        "n_data_trajs": 12,
        "n_gen_trajs": 6,
        "n_data_batch": 6,
        "model": {"force_model": "double_well", "n_steps": 8},
        "protocol": {"kind": "marginals", "tau": 2e-3, "frag_len": 2, "n_fragments": 2},
        "kernel": {"length_scale": 0.1},
        "optim": {"epochs": 2, "lr": 1e-3},
        "mlp": {"hidden": [4, 4]},
        "data": {"burn_in_steps": 20},
        "evaluate": {"checkpoints": [2, 4], "n_trajs": 24},
    }
    raw.update(overrides)
    return RunConfig.model_validate(raw)


@pytest.fixture
def tiny_cfg() -> RunConfig:
    """Small OU run."""
    return tiny_config()


@pytest.fixture
def tiny_force_cfg() -> RunConfig:
    """Small force-law run."""
    return tiny_force_law_config()
