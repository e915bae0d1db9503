"""
Generative model parameters and the learnable-channel layout.

GenModelParams holds every physical and numerical setting of the m-step
generator. ParameterLayout selects the learnable subset as named channels
and maps it to and from the flat vector the optimizer works on. Channels
flagged as log-space are stored as log values in that vector.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.core.exception_handling.error_handler import InvalidArgumentError
from app.services.mlp.network import MlpSpec

ForceModel = Literal["linear", "neural", "double_well"]
FORCE_MODELS = ("linear", "neural", "double_well")

SCALAR_CHANNELS = ("stiffness", "gamma", "kbt")
POSITIVE_CHANNELS = ("stiffness", "gamma", "kbt")
CHANNELS_BY_MODEL = {
    "linear": ("stiffness", "gamma", "kbt", "const_force"),
    "neural": ("gamma", "kbt", "neural_weights"),
    "double_well": ("gamma", "kbt"),
}


@dataclass(frozen=True, eq=False)
class GenModelParams:
    """
    Parameters of the second-order generative model.

    Attributes:
        mass: Particle mass m
        gamma: Damping coefficient
        kbt: Temperature factor k_B T
        stiffness: Harmonic stiffness K0 (linear model)
        const_force: Constant force F0, one entry per dimension
        force_model: Force law tag
        neural_weights: Flat MLP parameters (neural model)
        dt: Time step
        n_steps: Number of steps N (trajectories hold N + 1 slices)
        dim: Spatial dimension d
        mlp_spec: Network architecture (neural model)
        well_strength: kappa of the double-well force
        well_radius: r0 of the double-well force
    """

    mass: float = 0.1
    gamma: float = 3.2
    kbt: float = 0.1
    stiffness: float = 1.5
    const_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force_model: ForceModel = "linear"
    neural_weights: Optional[np.ndarray] = None
    dt: float = 1e-3
    n_steps: int = 18
    dim: int = 3
    mlp_spec: Optional[MlpSpec] = None
    well_strength: float = 1.0
    well_radius: float = 1.0

    m_steps = 2

    def __post_init__(self):
        if self.force_model not in FORCE_MODELS:
            raise InvalidArgumentError("Unknown force model", force_model=self.force_model)
        if self.mass <= 0 or self.dt <= 0:
            raise InvalidArgumentError("mass and dt must be positive", mass=self.mass, dt=self.dt)
        if self.gamma < 0 or self.kbt < 0:
            raise InvalidArgumentError(
                "gamma and kbt must be non-negative", gamma=self.gamma, kbt=self.kbt
            )
        if self.dim < 1 or self.n_steps < self.m_steps:
            raise InvalidArgumentError(
                "n_steps must cover the start-up states", n_steps=self.n_steps, dim=self.dim
            )
        const_force = np.asarray(self.const_force, dtype=float).ravel()
        if const_force.size != self.dim:
            raise InvalidArgumentError(
                "const_force needs one entry per dimension",
                dim=self.dim,
                size=int(const_force.size),
            )
        object.__setattr__(self, "const_force", const_force)
        if self.force_model == "neural":
            spec = self.mlp_spec or MlpSpec()
            object.__setattr__(self, "mlp_spec", spec)
            if self.neural_weights is None:
                raise InvalidArgumentError("Neural force model requires weights")
            weights = np.asarray(self.neural_weights, dtype=float).ravel()
            if weights.size != spec.param_count():
                raise InvalidArgumentError(
                    "Neural weights do not match the network",
                    expected=spec.param_count(),
                    actual=int(weights.size),
                )
            object.__setattr__(self, "neural_weights", weights)

    @property
    def sigma(self) -> float:
        """Noise strength sqrt(2 k_B T gamma)."""
        return float(np.sqrt(2.0 * self.kbt * self.gamma))

    def replace(self, **changes) -> "GenModelParams":
        """Return a copy with the given fields changed."""
        return replace(self, **changes)


@dataclass(frozen=True)
class Channel:
    """One learnable entry group of GenModelParams."""

    name: str
    size: int
    log_space: bool


class ParameterLayout:
    """
    Index set of the learnable channels.

    The flat optimizer vector concatenates the channels in the given order.
    Fixed entries of GenModelParams never appear in it and are carried over
    unchanged by ``unpack``.
    """

    def __init__(self, params: GenModelParams, names: Sequence[str], log_space: bool = True):
        allowed = CHANNELS_BY_MODEL[params.force_model]
        channels: List[Channel] = []
        for name in names:
            if name not in allowed:
                raise InvalidArgumentError(
                    "Channel is not learnable for this force model",
                    channel=name,
                    force_model=params.force_model,
                )
            if name == "const_force":
                size = params.dim
            elif name == "neural_weights":
                size = params.neural_weights.size
            else:
                size = 1
            channels.append(Channel(name, size, log_space and name in POSITIVE_CHANNELS))
        if len({c.name for c in channels}) != len(channels):
            raise InvalidArgumentError("Duplicate learnable channel", channels=list(names))
        self.channels: Tuple[Channel, ...] = tuple(channels)
        self.force_model = params.force_model

    @property
    def names(self) -> List[str]:
        """Channel names in vector order."""
        return [c.name for c in self.channels]

    @property
    def size(self) -> int:
        """Length n_p of the optimizer vector."""
        return sum(c.size for c in self.channels)

    def slices(self) -> Dict[str, slice]:
        """Position of every channel in the optimizer vector."""
        out = {}
        offset = 0
        for c in self.channels:
            out[c.name] = slice(offset, offset + c.size)
            offset += c.size
        return out

    def labels(self) -> List[str]:
        """Per-entry labels, e.g. ``const_force[1]``."""
        out = []
        for c in self.channels:
            if c.size == 1:
                out.append(c.name)
            else:
                out.extend(f"{c.name}[{i}]" for i in range(c.size))
        return out

    def pack(self, params: GenModelParams) -> np.ndarray:
        """Learnable entries of ``params`` in optimizer coordinates."""
        parts = []
        for c in self.channels:
            value = np.atleast_1d(np.asarray(getattr(params, c.name), dtype=float)).copy()
            if c.log_space:
                if np.any(value <= 0):
                    raise InvalidArgumentError(
                        "Log-space channel must be positive", channel=c.name
                    )
                value = np.log(value)
            parts.append(value)
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, theta, base: GenModelParams) -> GenModelParams:
        """Write optimizer coordinates back into a copy of ``base``."""
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.size:
            raise InvalidArgumentError(
                "Optimizer vector length does not match the layout",
                expected=self.size,
                actual=int(theta.size),
            )
        changes = {}
        for c, sl in zip(self.channels, self.slices().values()):
            value = theta[sl]
            if c.log_space:
                value = np.exp(value)
            changes[c.name] = float(value[0]) if c.name in SCALAR_CHANNELS else value.copy()
        return base.replace(**changes)

    def chain_factors(self, params: GenModelParams) -> np.ndarray:
        """d(natural value)/d(optimizer coordinate) for every entry."""
        parts = []
        for c in self.channels:
            if c.log_space:
                parts.append(np.full(c.size, float(getattr(params, c.name))))
            else:
                parts.append(np.ones(c.size))
        return np.concatenate(parts) if parts else np.zeros(0)

    def natural_values(self, params: GenModelParams) -> Dict[str, float]:
        """Scalar learnable values in natural units, for metrics and reports."""
        out: Dict[str, float] = {}
        for c in self.channels:
            if c.name == "neural_weights":
                continue
            value = np.atleast_1d(np.asarray(getattr(params, c.name), dtype=float))
            if c.size == 1:
                out[c.name] = float(value[0])
            else:
                for i, v in enumerate(value):
                    out[f"{c.name}_{i + 1}"] = float(v)
        return out
