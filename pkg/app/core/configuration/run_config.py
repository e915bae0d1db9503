"""
Run configuration for training and evaluation jobs.

A run is described by one TOML file. Sections mirror the services they feed:
[model] is the ground-truth generator, [trainee] says where training starts
and what it may change, [protocol], [kernel] and [optim] configure the loss
and the optimizer, [mlp], [data] and [evaluate] cover the force network,
the initial states of the data and the evaluation metrics. [sweep] lists
the protocols and tau values a sweep iterates over.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.concurrency.workers import STREAM_INIT, sample_rng
from app.core.exception_handling.error_handler import (
    BaseAppException,
    ConfigurationError,
)
from app.core.logging.logger import get_logger
from app.services.integrators.params import (
    CHANNELS_BY_MODEL,
    SCALAR_CHANNELS,
    GenModelParams,
    ParameterLayout,
)
from app.services.kernels.rational_quadratic import KernelConfig
from app.services.mlp.network import DEFAULT_HIDDEN, MlpSpec, init_weights
from app.services.protocols.fragments import ProtocolSpec

logger = get_logger(__name__)

Experiment = Literal["ou_recovery", "force_law"]

DEFAULT_LEARNABLE = {
    "ou_recovery": ["stiffness", "gamma", "kbt"],
    "force_law": ["neural_weights"],
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    """Ground-truth generative model."""

    force_model: Literal["linear", "neural", "double_well"] = "linear"
    mass: float = Field(default=0.1, gt=0.0)
    gamma: float = Field(default=3.2, ge=0.0)
    kbt: float = Field(default=0.1, ge=0.0)
    stiffness: float = 1.5
    const_force: Optional[List[float]] = None
    dt: float = Field(default=1e-3, gt=0.0)
    n_steps: int = Field(default=18, ge=2)
    dim: int = Field(default=3, ge=1)
    well_strength: float = 1.0
    well_radius: float = 1.0


class TraineeSection(_Section):
    """Starting point and learnable channels of the trained model."""

    init_scale: float = Field(default=2.0, gt=0.0)
    learnable: Optional[List[str]] = None
    log_space: bool = True
    stiffness: Optional[float] = None
    gamma: Optional[float] = None
    kbt: Optional[float] = None
    const_force: Optional[List[float]] = None


class OptimSection(_Section):
    """ADAM hyperparameters and epoch count."""

    lr: float = Field(default=1e-2, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    epochs: int = Field(default=3000, ge=1)
    schedule: Literal["constant", "linear"] = "constant"


class MlpSection(_Section):
    """Force network architecture and initialisation seed."""

    hidden: List[int] = Field(default_factory=lambda: list(DEFAULT_HIDDEN))
    leaky_slope: float = 0.01
    init_seed: int = Field(default=0, ge=0)


class DataSection(_Section):
    """
    Initial states of the ground-truth trajectories.

    ``fixed_position`` starts every path at start_position with a Gibbs
    velocity; ``rest_shell`` starts at rest at a radius drawn uniformly
    from [init_radius_min, init_radius].
    """

    initial: Optional[Literal["equilibrium", "burn_in", "fixed_position", "rest_shell"]] = None
    burn_in_steps: int = Field(default=1000, ge=0)
    init_radius: float = Field(default=1.0, gt=0.0)
    init_radius_min: Optional[float] = Field(default=None, gt=0.0)
    start_position: Optional[List[float]] = None


class EvaluateSection(_Section):
    """Evaluation metrics settings; start_radius replaces the data start rule."""

    checkpoints: List[int] = Field(default_factory=lambda: [50, 100, 200])
    hist_range: float = Field(default=2.5, gt=0.0)
    bin_width: float = Field(default=0.05, gt=0.0)
    n_trajs: int = Field(default=2048, ge=2)
    start_radius: Optional[float] = Field(default=None, gt=0.0)


class SweepSection(_Section):
    """Grid of the protocol and time-scale sweep."""

    protocols: List[Literal["full_traj", "marginals", "conditionals"]] = Field(
        default_factory=lambda: ["full_traj", "conditionals", "marginals"]
    )
    taus: List[float] = Field(default_factory=lambda: [1.7e-2, 1.2e-2, 6e-3, 4e-3, 3e-3, 2e-3])


class RunConfig(_Section):
    """Complete description of one training job."""

    experiment: Experiment = "ou_recovery"
    master_seed: int = Field(default=0, ge=0)
    n_data_trajs: int = Field(default=256, ge=2)
    n_gen_trajs: int = Field(default=64, ge=2)
    n_data_batch: int = Field(default=64, ge=2)
    runs: int = Field(default=4, ge=1)
    checkpoint_every: int = Field(default=100, ge=1)
    output_dir: str = "output"

    model: ModelSection = Field(default_factory=ModelSection)
    trainee: TraineeSection = Field(default_factory=TraineeSection)
    protocol: ProtocolSpec = Field(default_factory=ProtocolSpec)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    optim: OptimSection = Field(default_factory=OptimSection)
    mlp: MlpSection = Field(default_factory=MlpSection)
    data: DataSection = Field(default_factory=DataSection)
    evaluate: EvaluateSection = Field(default_factory=EvaluateSection)
    sweep: SweepSection = Field(default_factory=SweepSection)

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.experiment == "ou_recovery" and self.model.force_model != "linear":
            raise ValueError("ou_recovery requires the linear force model")
        if self.experiment == "force_law" and self.model.force_model == "linear":
            raise ValueError("force_law requires a radial target force model")
        if self.model.const_force is not None and len(self.model.const_force) != self.model.dim:
            raise ValueError("model.const_force needs one entry per dimension")
        self._check_starts()
        if self.n_gen_trajs % self.protocol.noise_per_seed:
            raise ValueError("n_gen_trajs must be a multiple of protocol.noise_per_seed")
        try:
            self.protocol.relative_pattern(self.model.dt, self.model.n_steps)
            self.protocol.offsets(self.model.dt, self.model.n_steps)
        except BaseAppException as exc:
            raise ValueError(exc.message) from exc
        allowed = CHANNELS_BY_MODEL[self.trainee_force_model]
        unknown = [c for c in self.learnable_channels if c not in allowed]
        if unknown:
            raise ValueError(f"trainee.learnable must be drawn from {list(allowed)}")
        return self

    def _check_starts(self) -> None:
        data = self.data
        if self.initial_states == "fixed_position":
            if data.start_position is None or len(data.start_position) != self.model.dim:
                raise ValueError("data.start_position needs one entry per dimension")
        if data.init_radius_min is not None and data.init_radius_min > data.init_radius:
            raise ValueError("data.init_radius_min must not exceed data.init_radius")

    @property
    def n_seed_pairs(self) -> int:
        """Observed seed pairs the generator starts from each epoch."""
        return self.n_gen_trajs // self.protocol.noise_per_seed

    @property
    def trainee_force_model(self) -> str:
        """Force law of the trained model."""
        return "neural" if self.experiment == "force_law" else "linear"

    @property
    def learnable_channels(self) -> List[str]:
        """Channels the optimizer updates."""
        return list(self.trainee.learnable or DEFAULT_LEARNABLE[self.experiment])

    @property
    def initial_states(self) -> str:
        """Initial-state rule of the data trajectories."""
        if self.data.initial:
            return self.data.initial
        return "equilibrium" if self.model.force_model == "linear" else "burn_in"

    def mlp_spec(self) -> MlpSpec:
        """Architecture of the force network."""
        return MlpSpec.from_hidden(self.mlp.hidden, self.mlp.leaky_slope)

    def target_params(self) -> GenModelParams:
        """Ground-truth generative model."""
        section = self.model
        const_force = section.const_force or [0.0] * section.dim
        return GenModelParams(
            mass=section.mass,
            gamma=section.gamma,
            kbt=section.kbt,
            stiffness=section.stiffness,
            const_force=np.array(const_force, dtype=float),
            force_model=section.force_model,
            dt=section.dt,
            n_steps=section.n_steps,
            dim=section.dim,
            well_strength=section.well_strength,
            well_radius=section.well_radius,
        )

    def trainee_params(self) -> GenModelParams:
        """
        Starting point of training.

        Explicit [trainee] values win; otherwise every learnable scalar and
        const_force start at init_scale times the target value. The trainee
        shares mass, dt, n_steps and dim with the target.
        """
        target = self.target_params()
        learnable = self.learnable_channels
        scale = self.trainee.init_scale
        changes = {}
        for name in SCALAR_CHANNELS:
            explicit = getattr(self.trainee, name)
            if explicit is not None:
                changes[name] = float(explicit)
            elif name in learnable:
                changes[name] = scale * getattr(target, name)
        if self.trainee.const_force is not None:
            changes["const_force"] = np.array(self.trainee.const_force, dtype=float)
        elif "const_force" in learnable:
            changes["const_force"] = scale * target.const_force
        if self.trainee_force_model == "neural":
            spec = self.mlp_spec()
            rng = sample_rng(self.master_seed, STREAM_INIT, self.mlp.init_seed)
            changes.update(
                force_model="neural", mlp_spec=spec, neural_weights=init_weights(spec, rng)
            )
        return target.replace(**changes)

    def layout(self, params: Optional[GenModelParams] = None) -> ParameterLayout:
        """Learnable layout over the trainee parameters."""
        params = params or self.trainee_params()
        return ParameterLayout(params, self.learnable_channels, self.trainee.log_space)

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with a different master seed."""
        return self.model_copy(update={"master_seed": int(seed)})


def load_run_config(path, seed_override: Optional[int] = None) -> RunConfig:
    """
    Load and validate a run configuration file.

    Args:
        path: TOML file
        seed_override: Replaces master_seed when given

    Returns:
        RunConfig: The validated configuration

    Raises:
        ConfigurationError: If the file is unreadable or invalid
    """
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"Cannot read configuration: {e}", source=str(path)) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Malformed configuration: {e}", source=str(path)) from e
    if seed_override is not None:
        raw["master_seed"] = int(seed_override)
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}", source=str(path)) from e
    logger.debug("Loaded run configuration %s (experiment=%s)", path, cfg.experiment)
    return cfg
