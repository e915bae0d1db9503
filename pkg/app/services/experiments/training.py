"""
Training loop of the generative model.

Every epoch draws a batch of observed fragments, seeds the generator from
observed seed slices, simulates it with fresh noise, and takes one ADAM step
along the adjoint gradient of the unbiased MMD^2 between the two batches.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.core.concurrency.workers import STREAM_BATCH, STREAM_GENERATOR, WorkerPool, sample_rng
from app.core.configuration.config import settings
from app.core.configuration.run_config import RunConfig
from app.core.exception_handling.error_handler import ConfigurationError
from app.core.logging.logger import get_logger
from app.core.logging.utils import OperationLogger, get_context_logger
from app.services.adjoint.solver import solve_adjoint, write_adjoint_csv
from app.services.experiments.data import generate_training_data, simulate_from_starts
from app.services.experiments.metrics import relative_errors
from app.services.integrators.params import GenModelParams, ParameterLayout
from app.services.integrators.trajectory import Trajectory
from app.services.mmd_loss.estimator import (
    fragment_cotangents,
    mmd2_grad,
    mmd2_unbiased,
    scatter_cotangent,
)
from app.services.optimizer.adam import AdamState, adam_step
from app.services.protocols.fragments import (
    ProtocolOutput,
    extract_fragments,
    extract_pattern,
    seed_generator_from,
)

logger = get_logger(__name__)

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.json"
FLOAT_FORMAT = "%.17g"


@dataclass
class MetricsRecord:
    """
    History and final accuracy of one training run.

    Attributes:
        epochs: Epoch indices
        losses: MMD^2 estimate per epoch, before that epoch's update
        params: Learnable scalar values per epoch, in natural units
        final_params: Parameters after the last update
        relative_errors: Final relative error per learnable scalar
        l1_errors: Radial L1 errors per evaluation step, when evaluated
    """

    epochs: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    params: List[Dict[str, float]] = field(default_factory=list)
    final_params: Optional[GenModelParams] = None
    relative_errors: Dict[str, float] = field(default_factory=dict)
    l1_errors: Dict[int, float] = field(default_factory=dict)

    def row(self, i: int) -> Dict[str, float]:
        """Metrics CSV row of the i-th recorded epoch."""
        return {"epoch": self.epochs[i], "loss": self.losses[i], **self.params[i]}

    def to_frame(self) -> pd.DataFrame:
        """All recorded epochs as a table."""
        return pd.DataFrame([self.row(i) for i in range(len(self.epochs))])


class OptimizerSnapshot(BaseModel):
    """Serialisable ADAM state."""

    step_count: int
    first_moment: List[float]
    second_moment: List[float]


class Checkpoint(BaseModel):
    """Learned parameters and optimizer state after some epoch."""

    epoch: int
    master_seed: int
    channels: List[str]
    values: Dict[str, float]
    const_force: List[float]
    neural_weights: Optional[List[float]] = None
    optimizer: OptimizerSnapshot

    @classmethod
    def capture(
        cls,
        epoch: int,
        cfg: RunConfig,
        params: GenModelParams,
        layout: ParameterLayout,
        state: AdamState,
    ) -> "Checkpoint":
        """Snapshot the current training state."""
        return cls(
            epoch=epoch,
            master_seed=cfg.master_seed,
            channels=layout.names,
            values={"stiffness": params.stiffness, "gamma": params.gamma, "kbt": params.kbt},
            const_force=params.const_force.tolist(),
            neural_weights=(
                None if params.neural_weights is None else params.neural_weights.tolist()
            ),
            optimizer=OptimizerSnapshot(
                step_count=state.step_count,
                first_moment=state.first_moment.tolist(),
                second_moment=state.second_moment.tolist(),
            ),
        )

    def to_params(self, base: GenModelParams) -> GenModelParams:
        """Apply the stored values to ``base`` (the trainee start point)."""
        changes = dict(self.values, const_force=np.array(self.const_force))
        if self.neural_weights is not None:
            changes["neural_weights"] = np.array(self.neural_weights)
        return base.replace(**changes)


def write_checkpoint(checkpoint: Checkpoint, path) -> Path:
    """Write a checkpoint as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(checkpoint.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_checkpoint(path) -> Checkpoint:
    """
    Read a checkpoint written by ``write_checkpoint``.

    Raises:
        ConfigurationError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        return Checkpoint.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"Cannot read checkpoint: {e}", source=str(path)) from e


def _append_metrics(path: Path, row: Dict[str, float], first: bool) -> None:
    pd.DataFrame([row]).to_csv(
        path, mode="w" if first else "a", header=first, index=False, float_format=FLOAT_FORMAT
    )


def _choose(rng: np.random.Generator, population: int, size: int) -> np.ndarray:
    return rng.choice(population, size=size, replace=size > population)


class _EpochBatches:
    """
    Draws the observed batch and the generator seeds of one epoch.

    The generator starts from the seed pairs of the first n_seed_pairs drawn
    observed rows (cycling when there are fewer rows), each repeated
    noise_per_seed times, so every generated fragment has observed
    counterparts sharing its seed slices.
    """

    def __init__(self, cfg: RunConfig, pool: ProtocolOutput):
        self.cfg = cfg
        self.pool = pool

    def seed_rows(self, data_rows: np.ndarray) -> np.ndarray:
        """Observed rows whose seed pairs start the generator."""
        return data_rows[np.arange(self.cfg.n_seed_pairs) % data_rows.size]

    def draw(self, epoch: int):
        rng = sample_rng(self.cfg.master_seed, STREAM_BATCH, epoch)
        data_rows = _choose(rng, len(self.pool.batch), self.cfg.n_data_batch)
        seeds = self.pool.take(self.seed_rows(data_rows))
        starts = seed_generator_from(seeds, self.cfg.protocol.noise_per_seed)
        return self.pool.batch.take(data_rows), starts


def _dump_adjoint(
    gen_batch, gen_trajs: Sequence[Trajectory], data_batch, p, cfg: RunConfig
) -> None:
    dump_dir = settings.adjoint_dump_dir if settings else None
    if not dump_dir:
        return
    cotangents = fragment_cotangents(gen_batch, data_batch, cfg.kernel)
    traj = gen_trajs[0]
    g_x = scatter_cotangent(cotangents[0], gen_batch.slice_index_map[0], traj)
    write_adjoint_csv(
        solve_adjoint(traj, p, g_x), Path(dump_dir) / f"adjoint_seed{cfg.master_seed}.csv"
    )


def run_training(
    cfg: RunConfig,
    output_dir=None,
    data: Optional[Sequence[Trajectory]] = None,
    pool: Optional[WorkerPool] = None,
) -> MetricsRecord:
    """
    Train the trainee model against ground-truth trajectories.

    Args:
        cfg: Run configuration
        output_dir: Directory for the metrics CSV and checkpoint; nothing is
            written when None
        data: Ground-truth trajectories; generated from cfg when None
        pool: Worker pool for simulations and adjoint solves

    Returns:
        MetricsRecord: Loss and parameter history with final relative errors

    Raises:
        OptimizerHaltError: If a gradient entry becomes non-finite
    """
    runner = pool or WorkerPool()
    run_logger = get_context_logger(__name__, seed=cfg.master_seed, protocol=cfg.protocol.kind)
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    with OperationLogger(
        logger,
        "run_training",
        {"context": {"seed": cfg.master_seed, "epochs": cfg.optim.epochs}},
    ):
        trajs = list(data) if data is not None else generate_training_data(cfg, pool=runner)
        target = cfg.target_params()
        start = cfg.trainee_params()
        layout = cfg.layout(start)
        n_steps = target.n_steps
        gen_base = start.replace(n_steps=cfg.protocol.generator_steps(target.dt, n_steps))
        batches = _EpochBatches(cfg, extract_fragments(trajs, cfg.protocol))

        theta = layout.pack(start)
        state = AdamState.fresh(
            layout.size,
            lr=cfg.optim.lr,
            beta1=cfg.optim.beta1,
            beta2=cfg.optim.beta2,
            eps=cfg.optim.eps,
            schedule=cfg.optim.schedule,
            total_steps=cfg.optim.epochs,
            labels=tuple(layout.labels()),
        )
        record = MetricsRecord()
        last = cfg.optim.epochs - 1
        for epoch in range(cfg.optim.epochs):
            current = layout.unpack(theta, gen_base)
            data_batch, starts = batches.draw(epoch)
            gen_trajs = simulate_from_starts(
                current, starts, cfg.master_seed, STREAM_GENERATOR, epoch, pool=runner
            )
            gen_batch = extract_pattern(gen_trajs, cfg.protocol, n_steps)
            loss = mmd2_unbiased(gen_batch, data_batch, cfg.kernel, pool=runner)
            grad = mmd2_grad(
                gen_batch, gen_trajs, data_batch, current, cfg.kernel, layout, pool=runner
            )
            record.epochs.append(epoch)
            record.losses.append(loss)
            record.params.append(layout.natural_values(current))
            if out is not None:
                _append_metrics(out / METRICS_FILE, record.row(epoch), first=epoch == 0)
            run_logger.debug("epoch %d loss %.6e", epoch, loss)

            state, theta = adam_step(state, theta, grad, epoch=epoch)

            if epoch == last:
                _dump_adjoint(gen_batch, gen_trajs, data_batch, current, cfg)
            if out is not None and ((epoch + 1) % cfg.checkpoint_every == 0 or epoch == last):
                learned = layout.unpack(theta, start)
                write_checkpoint(
                    Checkpoint.capture(epoch, cfg, learned, layout, state),
                    out / CHECKPOINT_FILE,
                )
                run_logger.info("checkpoint after epoch %d, loss %.6e", epoch, loss)

        record.final_params = layout.unpack(theta, start)
        record.relative_errors = relative_errors(record.final_params, target, layout)
        run_logger.info("final relative errors %s", record.relative_errors)
        return record
