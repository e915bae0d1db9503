"""Unit tests for the force laws."""

import numpy as np
import pytest

from app.core.exception_handling.error_handler import DegenerateRadiusError
from app.services.integrators.forces import force_eval, force_grad, force_terms
from app.services.integrators.params import GenModelParams
from app.services.mlp.network import MlpSpec, init_weights


def _numeric_jacobian(p, x, h=1e-6):
    cols = [(force_eval(p, x + h * e) - force_eval(p, x - h * e)) / (2 * h) for e in np.eye(x.size)]
    return np.array(cols).T


class TestForces:
    """Tests for force_eval, force_grad and force_terms."""

    def test_linear_force(self, ou_params):
        """Test F = -K0 x + F0."""
        p = ou_params.replace(const_force=np.array([0.5, 0.0, -0.5]))
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(force_eval(p, x), [-1.0, -3.0, -5.0])
        np.testing.assert_allclose(force_grad(p, x), -1.5 * np.eye(3))

    def test_double_well_zero_at_well_radius(self):
        """Test the double-well force vanishes on the sphere r = r0."""
        p = GenModelParams(force_model="double_well")
        np.testing.assert_allclose(force_eval(p, [0.0, 1.0, 0.0]), 0.0, atol=1e-15)

    def test_double_well_value(self):
        """Test F(2) = -4 * 2 * (4 - 1) = -24 along the radius."""
        p = GenModelParams(force_model="double_well")
        np.testing.assert_allclose(force_eval(p, [2.0, 0.0, 0.0]), [-24.0, 0.0, 0.0])

    def test_double_well_jacobian(self, rng):
        """Test the radial jacobian against finite differences."""
        p = GenModelParams(force_model="double_well")
        x = rng.standard_normal(3)
        np.testing.assert_allclose(force_grad(p, x), _numeric_jacobian(p, x), rtol=1e-6, atol=1e-7)

    def test_neural_terms(self, rng):
        """Test force, jacobian and weight gradient of the neural model."""
        spec = MlpSpec.from_hidden([6, 6])
        p = GenModelParams(
            force_model="neural", mlp_spec=spec, neural_weights=init_weights(spec, rng)
        )
        x = np.array([0.3, -0.4, 1.2])
        terms = force_terms(p, x)
        np.testing.assert_allclose(terms.value, force_eval(p, x))
        np.testing.assert_allclose(terms.jacobian, _numeric_jacobian(p, x), rtol=1e-5, atol=1e-8)
        assert terms.weight_grad.size == spec.param_count()
        np.testing.assert_allclose(terms.radial_unit, x / np.linalg.norm(x))

    def test_degenerate_radius(self):
        """Test radial forces refuse the origin."""
        p = GenModelParams(force_model="double_well")
        with pytest.raises(DegenerateRadiusError):
            force_eval(p, np.zeros(3))
