"""
Ground-truth trajectories and generator batches.

Start-up states come from one of four rules. ``equilibrium`` (linear force
only) draws X_0 and V_0 from the Gibbs-Boltzmann distribution and takes X_1
from one velocity-form step driven by xi_1, the first entry of the
trajectory's own noise record. ``fixed_position`` does the same from a
configured X_0. ``burn_in`` starts at rest at a random point of the sphere
of radius init_radius and discards burn_in_steps of the target scheme.
``rest_shell`` starts at rest at a random radius in
[init_radius_min, init_radius] with no burn-in.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.concurrency.workers import STREAM_DATA, WorkerPool, sample_rng
from app.core.configuration.run_config import RunConfig
from app.core.exception_handling.error_handler import InvalidArgumentError
from app.core.logging.logger import get_logger
from app.core.logging.utils import OperationLogger, log_function_call
from app.services.integrators.farago import farago_coeffs, simulate
from app.services.integrators.forces import force_eval
from app.services.integrators.params import GenModelParams
from app.services.integrators.trajectory import Trajectory

logger = get_logger(__name__)

SeedPair = Tuple[np.ndarray, np.ndarray]


def _velocity_step(p: GenModelParams, x0: np.ndarray, v0: np.ndarray, xi_1) -> np.ndarray:
    """X_1 one velocity-form step after (x0, v0)."""
    coeffs = farago_coeffs(p)
    half = p.dt / (2.0 * p.mass)
    eta_1 = p.sigma * np.sqrt(p.dt) * np.asarray(xi_1, dtype=float)
    return (
        x0
        + coeffs.b * p.dt * v0
        + coeffs.b * p.dt * half * force_eval(p, x0)
        + coeffs.b * half * eta_1
    )


def gibbs_velocity(p: GenModelParams, rng: np.random.Generator) -> np.ndarray:
    """Velocity drawn from N(0, kbt / mass) per component."""
    return np.sqrt(p.kbt / p.mass) * rng.standard_normal(p.dim)


def equilibrium_pair(p: GenModelParams, rng: np.random.Generator, xi_1) -> SeedPair:
    """Equilibrium X_0 with the X_1 one velocity-form step later."""
    if p.force_model != "linear":
        raise InvalidArgumentError(
            "Equilibrium start-up states need the linear force model",
            force_model=p.force_model,
        )
    mean = p.const_force / p.stiffness
    x0 = mean + np.sqrt(p.kbt / p.stiffness) * rng.standard_normal(p.dim)
    v0 = gibbs_velocity(p, rng)
    return x0, _velocity_step(p, x0, v0, xi_1)


def fixed_position_pair(
    p: GenModelParams, rng: np.random.Generator, position, xi_1
) -> SeedPair:
    """X_0 at ``position`` with a Gibbs velocity, X_1 one step later."""
    x0 = np.array(position, dtype=float)
    return x0, _velocity_step(p, x0, gibbs_velocity(p, rng), xi_1)


def _sphere_point(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal(dim)
    return radius * direction / np.linalg.norm(direction)


def rest_pair(p: GenModelParams, rng: np.random.Generator, r_min: float, r_max: float) -> SeedPair:
    """At rest on a sphere whose radius is uniform on [r_min, r_max]."""
    x0 = _sphere_point(rng, p.dim, rng.uniform(r_min, r_max))
    return x0, x0.copy()


def burn_in_pair(
    p: GenModelParams, rng: np.random.Generator, init_radius: float, burn_in_steps: int
) -> SeedPair:
    """Last two states after burning in from rest on a sphere."""
    x0 = _sphere_point(rng, p.dim, init_radius)
    if burn_in_steps < 2:
        return x0, x0.copy()
    burn = simulate(p.replace(n_steps=burn_in_steps), (x0, x0), rng)
    return burn.values[-2].copy(), burn.values[-1].copy()


def draw_start(
    cfg: RunConfig, p: GenModelParams, rng: np.random.Generator, noise: np.ndarray
) -> SeedPair:
    """Start-up pair under the configured rule; ``noise`` is the path's record."""
    data = cfg.data
    rule = cfg.initial_states
    if rule == "equilibrium":
        return equilibrium_pair(p, rng, noise[0])
    if rule == "fixed_position":
        return fixed_position_pair(p, rng, data.start_position, noise[0])
    if rule == "rest_shell":
        return rest_pair(p, rng, data.init_radius_min or data.init_radius, data.init_radius)
    return burn_in_pair(p, rng, data.init_radius, data.burn_in_steps)


def simulate_from_starts(
    p: GenModelParams,
    starts: Sequence[SeedPair],
    master_seed: int,
    stream: int,
    *key: int,
    pool: Optional[WorkerPool] = None,
) -> List[Trajectory]:
    """
    One trajectory per start-up pair, each with its own noise stream.

    Sample i draws from ``sample_rng(master_seed, stream, *key, i)`` and is
    tagged with sample_id i.
    """
    runner = pool or WorkerPool(1)

    def one(i: int) -> Trajectory:
        rng = sample_rng(master_seed, stream, *key, i)
        return simulate(p, starts[i], rng, seed=master_seed, sample_id=i)

    return runner.map(one, range(len(starts)))


@log_function_call()
def generate_training_data(
    cfg: RunConfig, pool: Optional[WorkerPool] = None
) -> List[Trajectory]:
    """
    Simulate the ground-truth trajectories of a run.

    Args:
        cfg: Run configuration
        pool: Worker pool for the per-trajectory simulations

    Returns:
        List[Trajectory]: n_data_trajs trajectories of the target model
    """
    p = cfg.target_params()
    runner = pool or WorkerPool(1)

    def one(i: int) -> Trajectory:
        rng = sample_rng(cfg.master_seed, STREAM_DATA, i)
        noise = rng.standard_normal((p.n_steps, p.dim))
        start = draw_start(cfg, p, rng, noise)
        return simulate(p, start, noise, seed=cfg.master_seed, sample_id=i)

    with OperationLogger(
        logger,
        "generate_training_data",
        {"context": {"n": cfg.n_data_trajs, "seed": cfg.master_seed}},
    ):
        return runner.map(one, range(cfg.n_data_trajs))
