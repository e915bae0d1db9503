"""
Conservative force laws of the generative model.

linear:       F(x) = -K0 x + F0, from U = K0 |x|^2 / 2 - F0 . x
neural:       F(x) = F(r; theta_F) x / r with F the scalar force network
double_well:  F(x) = -4 kappa r (r^2 - r0^2) x / r
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.exception_handling.error_handler import DegenerateRadiusError
from app.services.integrators.params import GenModelParams
from app.services.mlp.network import mlp_forward, mlp_grads

MIN_RADIUS = 1e-12


@dataclass(frozen=True)
class ForceTerms:
    """Force, its spatial jacobian and its weight gradient at one point."""

    value: np.ndarray
    jacobian: np.ndarray
    radial_unit: Optional[np.ndarray] = None
    weight_grad: Optional[np.ndarray] = None


def _radius(x: np.ndarray) -> Tuple[float, np.ndarray]:
    r = float(np.linalg.norm(x))
    if r < MIN_RADIUS:
        raise DegenerateRadiusError(r)
    return r, x / r


def _double_well(p: GenModelParams, r: float) -> Tuple[float, float]:
    """Scalar double-well force F(r) and its derivative F'(r)."""
    kappa, r0 = p.well_strength, p.well_radius
    return -4.0 * kappa * r * (r * r - r0 * r0), -4.0 * kappa * (3.0 * r * r - r0 * r0)


def _radial_jacobian(f: float, df: float, r: float, e: np.ndarray) -> np.ndarray:
    outer = np.outer(e, e)
    return df * outer + (f / r) * (np.eye(e.size) - outer)


def force_eval(p: GenModelParams, x) -> np.ndarray:
    """
    Evaluate the force at one position.

    Args:
        p: Model parameters selecting the force law
        x: Position, length d

    Returns:
        np.ndarray: Force vector

    Raises:
        DegenerateRadiusError: If a radial force is evaluated at |x| < 1e-12
    """
    x = np.asarray(x, dtype=float)
    if p.force_model == "linear":
        return -p.stiffness * x + p.const_force
    r, e = _radius(x)
    if p.force_model == "double_well":
        f, _ = _double_well(p, r)
    else:
        f = mlp_forward(p.mlp_spec, p.neural_weights, r)
    return f * e


def force_grad(p: GenModelParams, x) -> np.ndarray:
    """Spatial jacobian dF/dx (d x d) at one position."""
    return force_terms(p, x, with_weights=False).jacobian


def force_terms(p: GenModelParams, x, with_weights: bool = True) -> ForceTerms:
    """
    Force, jacobian and (neural model) weight gradient from a single pass.

    Args:
        p: Model parameters
        x: Position, length d
        with_weights: Also return dF(r)/dtheta_F for the neural model

    Returns:
        ForceTerms: The evaluated terms
    """
    x = np.asarray(x, dtype=float)
    if p.force_model == "linear":
        return ForceTerms(
            value=-p.stiffness * x + p.const_force,
            jacobian=-p.stiffness * np.eye(x.size),
        )
    r, e = _radius(x)
    if p.force_model == "neural":
        f = mlp_forward(p.mlp_spec, p.neural_weights, r)
        df, dtheta = mlp_grads(p.mlp_spec, p.neural_weights, r)
        return ForceTerms(
            value=f * e,
            jacobian=_radial_jacobian(f, df, r, e),
            radial_unit=e,
            weight_grad=dtheta if with_weights else None,
        )
    f, df = _double_well(p, r)
    return ForceTerms(value=f * e, jacobian=_radial_jacobian(f, df, r, e), radial_unit=e)
