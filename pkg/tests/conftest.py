# pylint: disable=unused-argument
"""
Test configuration and fixtures for the dynamics learner.

This module provides shared fixtures and helpers for unit tests: default
model parameters, kernel settings, seeded generators and small trajectory
batches, plus central finite-difference helpers used by the gradient tests.
"""

from typing import Callable, List

import numpy as np
import pytest

from app.core.configuration.config import get_settings
from app.services.integrators.farago import simulate
from app.services.integrators.params import GenModelParams
from app.services.integrators.trajectory import Trajectory
from app.services.kernels.rational_quadratic import KernelConfig


@pytest.fixture
def ou_params() -> GenModelParams:
    """Inertial OU defaults: m=0.1, K0=1.5, gamma=3.2, kbt=0.1, 18 steps."""
    return GenModelParams()


@pytest.fixture
def kernel_cfg() -> KernelConfig:
    """Study kernel: alpha=2, length_scale=0.01."""
    return KernelConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def ou_trajs(ou_params, rng) -> List[Trajectory]:
    """Eight OU trajectories from random start-up states."""
    return make_trajs(ou_params, rng, 8)


@pytest.fixture(scope="function")
def mock_env_vars(monkeypatch):
    """
    Set up environment variables for testing.

    Args:
        monkeypatch: Pytest fixture for modifying the environment

    Yields:
        None: The fixture makes environment changes and cleans up after tests
    """
    monkeypatch.setenv("DYNLEARN_APP_NAME", "Test App")
    monkeypatch.setenv("DYNLEARN_VERSION", "0.1.0")
    monkeypatch.setenv("DYNLEARN_LOG_LEVEL", "INFO")
    monkeypatch.setenv("DYNLEARN_LOG_FORMAT", "standard")
    monkeypatch.setenv("DYNLEARN_ENVIRONMENT", "testing")
    monkeypatch.setenv("DYNLEARN_WORKERS", "2")

    if hasattr(get_settings, "cache_clear"):
        get_settings.cache_clear()

    yield

    if hasattr(get_settings, "cache_clear"):
        get_settings.cache_clear()


def make_trajs(
    p: GenModelParams, rng: np.random.Generator, n: int, spread: float = 0.3
) -> List[Trajectory]:
    """Simulate n trajectories with start-up states X_0 = X_1 ~ N(0, spread^2)."""
    trajs = []
    for i in range(n):
        x0 = spread * rng.standard_normal(p.dim)
        trajs.append(simulate(p, (x0, x0 + 1e-3 * rng.standard_normal(p.dim)), rng, sample_id=i))
    return trajs


def central_difference(fn: Callable[[np.ndarray], float], theta, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        grad[i] = (fn(theta + step) - fn(theta - step)) / (2.0 * h)
    return grad
