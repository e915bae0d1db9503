"""
Two-step Farago discretization of inertial Langevin dynamics.

Position-only form, one application of the update map Psi_j:

    X_{j+1} = 2b X_j - a X_{j-1} + (b dt^2 / m) F(X_j)
              + (b dt / 2m) sigma sqrt(dt) (xi_{j+1} + xi_j)

    a = (1 - c) / (1 + c),  b = 1 / (1 + c),  c = gamma dt / 2m

with xi_j unit normals and sigma = sqrt(2 k_B T gamma). Keeping the noise as
unit normals makes the dependence on gamma and k_B T explicit, so the
parameter jacobians below are exact. The start-up states X_0, X_1 are
inputs and carry no parameter dependence.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from app.core.exception_handling.error_handler import (
    DivergedSimulationError,
    InvalidArgumentError,
    StabilityWarningError,
)
from app.core.logging.logger import get_logger
from app.services.integrators.forces import force_eval, force_terms
from app.services.integrators.params import GenModelParams, ParameterLayout
from app.services.integrators.trajectory import Trajectory

logger = get_logger(__name__)

NoiseSource = Union[np.random.Generator, np.ndarray]


@dataclass(frozen=True)
class FaragoCoeffs:
    """Scheme coefficients a and b."""

    a: float
    b: float


def farago_coeffs(p: GenModelParams) -> FaragoCoeffs:
    """
    Coefficients of the scheme for the given parameters.

    Raises:
        StabilityWarningError: If gamma dt / 2m >= 1
    """
    c = p.gamma * p.dt / (2.0 * p.mass)
    if c >= 1.0:
        raise StabilityWarningError(
            "gamma*dt/(2m) must stay below 1 for the scheme to be well behaved", ratio=c
        )
    b = 1.0 / (1.0 + c)
    return FaragoCoeffs(a=(1.0 - c) * b, b=b)


def _noise_scale(p: GenModelParams) -> float:
    """Prefactor (dt / 2m) sqrt(dt) multiplying b sigma (xi_{j+1} + xi_j)."""
    return p.dt / (2.0 * p.mass) * np.sqrt(p.dt)


def farago_step(
    p: GenModelParams,
    x_curr,
    x_prev,
    xi_next,
    xi_curr,
    coeffs: Optional[FaragoCoeffs] = None,
) -> np.ndarray:
    """
    Apply the update map once.

    Args:
        p: Model parameters
        x_curr: X_j
        x_prev: X_{j-1}
        xi_next: xi_{j+1}
        xi_curr: xi_j
        coeffs: Precomputed coefficients for ``p``

    Returns:
        np.ndarray: X_{j+1}
    """
    coeffs = coeffs or farago_coeffs(p)
    x_curr = np.asarray(x_curr, dtype=float)
    force = force_eval(p, x_curr)
    noise = _noise_scale(p) * p.sigma * (np.asarray(xi_next) + np.asarray(xi_curr))
    return (
        2.0 * coeffs.b * x_curr
        - coeffs.a * np.asarray(x_prev, dtype=float)
        + (coeffs.b * p.dt**2 / p.mass) * force
        + coeffs.b * noise
    )


def _resolve_noise(p: GenModelParams, noise_source: NoiseSource) -> np.ndarray:
    shape = (p.n_steps, p.dim)
    if isinstance(noise_source, np.random.Generator):
        return noise_source.standard_normal(shape)
    noise = np.asarray(noise_source, dtype=float)
    if noise.shape != shape:
        raise InvalidArgumentError(
            "Noise record has the wrong shape", expected=list(shape), actual=list(noise.shape)
        )
    return noise


def _check_init(p: GenModelParams, init) -> Tuple[np.ndarray, np.ndarray]:
    x0, x1 = (np.asarray(v, dtype=float).ravel() for v in init)
    if x0.size != p.dim or x1.size != p.dim:
        raise InvalidArgumentError("Start-up states must have dimension d", dim=p.dim)
    return x0, x1


def simulate(
    p: GenModelParams,
    init,
    noise_source: NoiseSource,
    seed: Optional[int] = None,
    sample_id: int = 0,
) -> Trajectory:
    """
    Simulate one trajectory of N steps from two start-up states.

    Args:
        p: Model parameters (N = p.n_steps)
        init: Pair (X_0, X_1)
        noise_source: Seeded generator, or an (N, d) array of unit normals
            to replay a stored noise record
        seed: Seed recorded on the trajectory
        sample_id: Index recorded on the trajectory

    Returns:
        Trajectory: N + 1 slices and the noise record that produced them

    Raises:
        DivergedSimulationError: If a force or state becomes non-finite
    """
    coeffs = farago_coeffs(p)
    noise = _resolve_noise(p, noise_source)
    x0, x1 = _check_init(p, init)

    values = np.empty((p.n_steps + 1, p.dim))
    values[0], values[1] = x0, x1
    drift = coeffs.b * p.dt**2 / p.mass
    kick = coeffs.b * _noise_scale(p) * p.sigma
    for j in range(1, p.n_steps):
        force = force_eval(p, values[j])
        if not np.all(np.isfinite(force)):
            raise DivergedSimulationError(step=j)
        values[j + 1] = (
            2.0 * coeffs.b * values[j]
            - coeffs.a * values[j - 1]
            + drift * force
            + kick * (noise[j] + noise[j - 1])
        )
        if not np.all(np.isfinite(values[j + 1])):
            raise DivergedSimulationError(step=j + 1)
    return Trajectory(values=values, noise=noise, dt=p.dt, seed=seed, sample_id=sample_id)


def simulate_velocity_form(
    p: GenModelParams, init, noise_source: NoiseSource
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Run the same scheme in its (X, V) Velocity-Verlet-like form.

    The start-up velocity V_0 is the one implied by X_0, X_1 and xi_1.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (N + 1, d) positions and velocities
    """
    coeffs = farago_coeffs(p)
    a, b = coeffs.a, coeffs.b
    noise = _resolve_noise(p, noise_source)
    x0, x1 = _check_init(p, init)
    eta = p.sigma * np.sqrt(p.dt) * noise  # eta[j - 1] holds eta_j
    half = p.dt / (2.0 * p.mass)

    xs = np.empty((p.n_steps + 1, p.dim))
    vs = np.empty_like(xs)
    xs[0], xs[1] = x0, x1
    f_prev = force_eval(p, x0)
    vs[0] = (x1 - x0 - b * p.dt * half * f_prev - b * half * eta[0]) / (b * p.dt)
    for n in range(1, p.n_steps):
        f_curr = force_eval(p, xs[n])
        vs[n] = a * vs[n - 1] + half * (a * f_prev + f_curr) + (b / p.mass) * eta[n - 1]
        xs[n + 1] = xs[n] + b * p.dt * vs[n] + b * p.dt * half * f_curr + b * half * eta[n]
        f_prev = f_curr
    f_last = force_eval(p, xs[-1])
    vs[-1] = (
        a * vs[-2] + half * (a * f_prev + f_last) + (b / p.mass) * eta[p.n_steps - 1]
    )
    return xs, vs


def _sigma_partials(p: GenModelParams) -> Tuple[float, float]:
    """d sigma / d gamma and d sigma / d kbt (zero when sigma vanishes)."""
    sigma = p.sigma
    if sigma == 0.0:
        return 0.0, 0.0
    return p.kbt / sigma, p.gamma / sigma


def step_jacobians(
    p: GenModelParams,
    traj: Trajectory,
    j: int,
    layout: Optional[ParameterLayout] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Jacobians of Psi_j, the map producing X_{j+1}.

    Args:
        p: Model parameters the trajectory was simulated with
        traj: The trajectory
        j: Step index, 1 <= j <= N - 1
        layout: Learnable channels; the parameter jacobian has one column
            per entry of the optimizer vector (log-space chain included)

    Returns:
        Tuple: dPsi/dX_j (d x d), dPsi/dX_{j-1} (d x d), dPsi/dp (d x n_p)

    Raises:
        InvalidArgumentError: If j is out of range
    """
    if not 1 <= j <= traj.n_steps - 1:
        raise InvalidArgumentError("Step index out of range", j=j, n_steps=traj.n_steps)
    coeffs = farago_coeffs(p)
    a, b = coeffs.a, coeffs.b
    x_curr, x_prev = traj.values[j], traj.values[j - 1]
    needs_weights = layout is not None and "neural_weights" in layout.names
    terms = force_terms(p, x_curr, with_weights=needs_weights)
    drift = b * p.dt**2 / p.mass

    d_curr = 2.0 * b * np.eye(p.dim) + drift * terms.jacobian
    d_prev = -a * np.eye(p.dim)
    if layout is None:
        return d_curr, d_prev, np.zeros((p.dim, 0))

    noise = _noise_scale(p) * (traj.noise[j] + traj.noise[j - 1])
    db_dgamma = -(b**2) * p.dt / (2.0 * p.mass)
    dsigma_dgamma, dsigma_dkbt = _sigma_partials(p)

    columns: List[np.ndarray] = []
    for channel in layout.channels:
        if channel.name == "stiffness":
            columns.append((-drift * x_curr)[:, None])
        elif channel.name == "gamma":
            col = db_dgamma * (
                2.0 * x_curr - 2.0 * x_prev + (p.dt**2 / p.mass) * terms.value + p.sigma * noise
            ) + b * noise * dsigma_dgamma
            columns.append(col[:, None])
        elif channel.name == "kbt":
            columns.append((b * noise * dsigma_dkbt)[:, None])
        elif channel.name == "const_force":
            columns.append(drift * np.eye(p.dim))
        elif channel.name == "neural_weights":
            columns.append(drift * np.outer(terms.radial_unit, terms.weight_grad))
    d_param = np.hstack(columns) * layout.chain_factors(p)[None, :]
    return d_curr, d_prev, d_param
