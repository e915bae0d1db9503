"""
Discrete adjoint of m-step generative models.

The trajectory constraints f(X, p) = 0 stack X_0, X_1 = seeds and
X_{j+1} - Psi_j(X_j, .., X_{j-m+1}; p) = 0. Their jacobian J in X is block
unit-lower-triangular, so J^T r = g_x^T is solved by a backward sweep:

    r_N = g_x(N)
    r_k = g_x(k) + sum_l (dPsi_{k+l-1} / dX_k)^T r_{k+l}

and the parameter gradient follows as g_p - r^T f_p with
f_p = -dPsi/dp on every evolved slice and zero on the seed slices. Memory per
sample is O(N d); no n_x by n_x matrix is formed.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.exception_handling.error_handler import (
    AdjointBlowupError,
    InvalidArgumentError,
)
from app.core.logging.logger import get_logger
from app.services.integrators.farago import step_jacobians
from app.services.integrators.params import GenModelParams, ParameterLayout
from app.services.integrators.trajectory import Trajectory

logger = get_logger(__name__)

# lag_jacobians(j) -> [dPsi_j/dX_j, dPsi_j/dX_{j-1}, ..., dPsi_j/dX_{j-m+1}]
LagJacobians = Callable[[int], Sequence[np.ndarray]]


@dataclass(frozen=True, eq=False)
class AdjointState:
    """Adjoint vectors r, one row per trajectory slice."""

    r: np.ndarray
    sample_id: int = 0


def _default_lags(p: GenModelParams, traj: Trajectory) -> LagJacobians:
    def lags(j: int) -> Sequence[np.ndarray]:
        d_curr, d_prev, _ = step_jacobians(p, traj, j)
        return (d_curr, d_prev)

    return lags


def solve_adjoint(
    traj: Trajectory,
    p: GenModelParams,
    g_x,
    lag_jacobians: Optional[LagJacobians] = None,
) -> AdjointState:
    """
    Solve J^T r = g_x^T by backward recurrence.

    Args:
        traj: Trajectory the cotangents refer to
        p: Parameters it was simulated with
        g_x: (N + 1, d) loss cotangents per slice, zero where the loss does
            not touch a slice
        lag_jacobians: Override for the per-step state jacobians; defaults to
            the Farago scheme with m = p.m_steps lags

    Returns:
        AdjointState: The adjoint vectors

    Raises:
        InvalidArgumentError: If g_x does not match the trajectory
        AdjointBlowupError: If an adjoint vector becomes non-finite
    """
    g_x = np.asarray(g_x, dtype=float)
    if g_x.shape != traj.values.shape:
        raise InvalidArgumentError(
            "Cotangents must have one row per slice",
            expected=list(traj.values.shape),
            actual=list(g_x.shape),
        )
    lags = lag_jacobians or _default_lags(p, traj)
    m = p.m_steps
    n = traj.n_steps

    r = g_x.copy()
    for j in range(n - 1, m - 2, -1):
        pending = r[j + 1]
        if not np.all(np.isfinite(pending)):
            raise AdjointBlowupError(step=j + 1, sample_id=traj.sample_id)
        for lag, jac in enumerate(lags(j)):
            r[j - lag] += jac.T @ pending
    if not np.all(np.isfinite(r)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(r), axis=1))[-1])
        raise AdjointBlowupError(step=bad, sample_id=traj.sample_id)
    return AdjointState(r=r, sample_id=traj.sample_id)


def assemble_gradient(
    traj: Trajectory,
    p: GenModelParams,
    adj: AdjointState,
    g_p_explicit,
    layout: ParameterLayout,
) -> np.ndarray:
    """
    Parameter gradient g_p - r^T f_p in optimizer coordinates.

    Args:
        traj: Trajectory the adjoint was solved on
        p: Parameters it was simulated with
        adj: Result of ``solve_adjoint`` on the same pair
        g_p_explicit: Explicit loss dependence on p (length n_p)
        layout: Learnable channels

    Returns:
        np.ndarray: Gradient of length n_p
    """
    g_p = np.asarray(g_p_explicit, dtype=float).ravel()
    if g_p.size != layout.size:
        raise InvalidArgumentError(
            "Explicit gradient does not match the layout",
            expected=layout.size,
            actual=int(g_p.size),
        )
    if adj.r.shape != traj.values.shape:
        raise InvalidArgumentError("Adjoint state does not match the trajectory")
    grad = g_p.copy()
    for j in range(p.m_steps - 1, traj.n_steps):
        if not np.any(adj.r[j + 1]):
            continue
        _, _, d_param = step_jacobians(p, traj, j, layout)
        grad += d_param.T @ adj.r[j + 1]
    return grad


def adjoint_gradient(
    traj: Trajectory, p: GenModelParams, g_x, layout: ParameterLayout
) -> np.ndarray:
    """Gradient of a loss with no explicit p dependence, through one trajectory."""
    adj = solve_adjoint(traj, p, g_x)
    return assemble_gradient(traj, p, adj, np.zeros(layout.size), layout)


def write_adjoint_csv(state: AdjointState, path) -> Path:
    """Dump adjoint vectors as CSV with columns step, r1..rd."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(state.r, columns=[f"r{i + 1}" for i in range(state.r.shape[1])])
    frame.insert(0, "step", np.arange(state.r.shape[0]))
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.debug("Wrote adjoint vectors of sample %d to %s", state.sample_id, path)
    return path
