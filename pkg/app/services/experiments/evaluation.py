"""Evaluation of a learned model against its target."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from app.core.concurrency.workers import STREAM_EVALUATION, WorkerPool, sample_rng
from app.core.configuration.run_config import RunConfig
from app.core.exception_handling.error_handler import InvalidArgumentError
from app.core.logging.logger import get_logger
from app.core.logging.utils import OperationLogger
from app.services.experiments.data import SeedPair, draw_start, rest_pair, simulate_from_starts
from app.services.experiments.metrics import l1_radial_error, relative_errors
from app.services.integrators.params import GenModelParams

logger = get_logger(__name__)

TARGET_KEY = 1
LEARNED_KEY = 2


@dataclass
class EvaluationRecord:
    """Relative parameter errors and radial L1 errors per evaluation step."""

    relative_errors: Dict[str, float] = field(default_factory=dict)
    l1_errors: Dict[int, float] = field(default_factory=dict)

    def as_metrics(self) -> Dict[str, float]:
        """Flat metric name to value mapping used by sweeps and reports."""
        out = {f"eps_rel_{name}": value for name, value in self.relative_errors.items()}
        out.update({f"l1_step_{step}": value for step, value in self.l1_errors.items()})
        return out


def evaluation_starts(cfg: RunConfig, p: GenModelParams) -> List[SeedPair]:
    """
    Start-up pairs shared by the target and learned simulations.

    With evaluate.start_radius set, every path starts at rest at that
    radius in a random direction; otherwise starts follow the data rule.
    """
    radius = cfg.evaluate.start_radius
    starts = []
    for i in range(cfg.evaluate.n_trajs):
        rng = sample_rng(cfg.master_seed, STREAM_EVALUATION, 0, i)
        if radius is not None:
            starts.append(rest_pair(p, rng, radius, radius))
            continue
        noise = rng.standard_normal((p.n_steps, p.dim))
        starts.append(draw_start(cfg, p, rng, noise))
    return starts


def evaluate_run(
    cfg: RunConfig, learned: GenModelParams, pool: Optional[WorkerPool] = None
) -> EvaluationRecord:
    """
    Compare a learned model with the target of its run.

    Relative errors cover every learnable scalar. For force_law runs the
    target and learned models are also simulated from the same start-up
    pairs, with independent noise, up to the largest evaluation step, and
    the radial L1 error is taken at every configured step.

    Args:
        cfg: Run configuration
        learned: Learned parameters
        pool: Worker pool for the simulations

    Returns:
        EvaluationRecord: The metrics
    """
    target = cfg.target_params()
    record = EvaluationRecord(relative_errors=relative_errors(learned, target, cfg.layout(learned)))
    if cfg.experiment != "force_law":
        return record

    steps = sorted(set(cfg.evaluate.checkpoints))
    if not steps or steps[0] < 0:
        raise InvalidArgumentError("Evaluation steps must be non-negative", steps=steps)
    horizon = max(2, steps[-1])
    runner = pool or WorkerPool()
    target_h = target.replace(n_steps=horizon)
    learned_h = learned.replace(n_steps=horizon)

    with OperationLogger(
        logger, "evaluate_run", {"context": {"seed": cfg.master_seed, "n": cfg.evaluate.n_trajs}}
    ):
        starts = evaluation_starts(cfg, target_h)
        target_trajs = simulate_from_starts(
            target_h, starts, cfg.master_seed, STREAM_EVALUATION, TARGET_KEY, pool=runner
        )
        learned_trajs = simulate_from_starts(
            learned_h, starts, cfg.master_seed, STREAM_EVALUATION, LEARNED_KEY, pool=runner
        )
        for step in steps:
            record.l1_errors[step] = l1_radial_error(
                learned_trajs,
                target_trajs,
                step,
                cfg.evaluate.hist_range,
                cfg.evaluate.bin_width,
            )
    logger.info("L1 radial errors %s", record.l1_errors)
    return record
