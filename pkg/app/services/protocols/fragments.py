"""
Training protocols: which trajectory slices get compared.

Every fragment starts with m = 2 seed slices (t_k, t_k + dt) followed by
evolving slices spaced by tau = a dt:

    full_traj      (0, 1 | a, 2a, .., N_T a),           N_T = floor(N / a)
    marginals      (t_k, t_k + 1 | s_k, s_k + a, ..),   ell evolving slices
    conditionals   the marginal evolving slices R_k only; the seed pair
                   Q_k = (t_k, t_k + 1) is returned separately

with s_k = t_k + s_lag a. Offsets t_k either step by one (``unit``) or stride
evenly over the admissible start range (``stride``).
"""

from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exception_handling.error_handler import (
    FragmentBoundsError,
    InvalidArgumentError,
    MissingSeedError,
)
from app.core.logging.logger import get_logger
from app.services.integrators.trajectory import Trajectory
from app.services.mmd_loss.batch import FragmentBatch, Origin

logger = get_logger(__name__)

ProtocolKind = Literal["full_traj", "marginals", "conditionals"]
PROTOCOL_KINDS = ("full_traj", "marginals", "conditionals")
SEED_SLICES = 2
GRID_TOLERANCE = 1e-9


class ProtocolSpec(BaseModel):
    """Protocol kind, time-scales and fragment counts."""

    model_config = ConfigDict(frozen=True)

    kind: ProtocolKind = "full_traj"
    tau: float = Field(default=1.0e-3, gt=0.0)
    delta_t: Optional[float] = Field(default=None, gt=0.0)
    frag_len: int = Field(default=1, ge=1)
    n_fragments: int = Field(default=1, ge=1)
    noise_per_seed: int = Field(default=1, ge=1)
    t_offsets: Optional[Literal["unit", "stride"]] = None
    s_lag: int = Field(default=1, ge=1)

    def tau_steps(self, dt: float) -> int:
        """
        tau as a whole number of time steps.

        Raises:
            InvalidArgumentError: If tau is not a multiple of dt or delta_t
                differs from dt
        """
        ratio = self.tau / dt
        steps = int(round(ratio))
        if steps < 1 or abs(ratio - steps) > GRID_TOLERANCE * max(1.0, ratio):
            raise InvalidArgumentError("tau must be an integer multiple of dt", tau=self.tau, dt=dt)
        if self.delta_t is not None and abs(self.delta_t - dt) > GRID_TOLERANCE * dt:
            raise InvalidArgumentError(
                "Seed spacing delta_t must equal dt", delta_t=self.delta_t, dt=dt
            )
        return steps

    def evolving_pattern(self, dt: float, n_steps: int) -> np.ndarray:
        """Evolving slice indices relative to t_k."""
        a = self.tau_steps(dt)
        if self.kind == "full_traj":
            n_t = n_steps // a
            if n_t < 1:
                raise FragmentBoundsError("tau exceeds the trajectory horizon", tau_steps=a)
            return a * np.arange(1, n_t + 1)
        return a * (self.s_lag + np.arange(self.frag_len))

    def relative_pattern(self, dt: float, n_steps: int) -> np.ndarray:
        """All compared slice indices relative to t_k, seed slices first."""
        evolving = self.evolving_pattern(dt, n_steps)
        if self.kind == "conditionals":
            return evolving
        return np.concatenate([np.arange(SEED_SLICES), evolving])

    def generator_steps(self, dt: float, n_steps: int) -> int:
        """Steps a generator needs to cover the pattern from its seed pair."""
        return max(SEED_SLICES, int(self.evolving_pattern(dt, n_steps)[-1]))

    def offsets(self, dt: float, n_steps: int) -> np.ndarray:
        """
        Start indices t_k of the fragments taken from one trajectory.

        Raises:
            FragmentBoundsError: If a fragment would leave the trajectory
        """
        last = int(self.evolving_pattern(dt, n_steps)[-1])
        if self.kind == "full_traj":
            return np.zeros(1, dtype=int)
        max_start = n_steps - last
        if max_start < 0:
            raise FragmentBoundsError(
                "Fragment extends beyond the horizon", last_slice=last, n_steps=n_steps
            )
        n = self.n_fragments
        if (self.t_offsets or "stride") == "unit":
            if n - 1 > max_start:
                raise FragmentBoundsError(
                    "Fragment offset out of range",
                    k=n - 1,
                    last_slice=n - 1 + last,
                    n_steps=n_steps,
                )
            return np.arange(n)
        if n == 1:
            return np.zeros(1, dtype=int)
        return (np.arange(n) * max_start) // (n - 1)


@dataclass(frozen=True, eq=False)
class ProtocolOutput:
    """
    Extracted fragments with the seed pairs they were conditioned on.

    Attributes:
        batch: The fragments
        seeds: (n, 2, d) states X_{t_k}, X_{t_k + 1} for every fragment
    """

    batch: FragmentBatch
    seeds: Optional[np.ndarray]

    def take(self, rows: Sequence[int]) -> "ProtocolOutput":
        """Rows of both the batch and the seeds."""
        rows = np.asarray(rows, dtype=int)
        seeds = None if self.seeds is None else self.seeds[rows]
        return ProtocolOutput(batch=self.batch.take(rows), seeds=seeds)


def _check_uniform(trajs: Sequence[Trajectory]) -> Tuple[float, int, int]:
    if not trajs:
        raise InvalidArgumentError("No trajectories to extract fragments from")
    shapes = {t.values.shape for t in trajs}
    if len(shapes) != 1:
        raise InvalidArgumentError("Trajectories must share their shape")
    first = trajs[0]
    return first.dt, first.n_steps, first.dim


def _assemble(
    trajs: Sequence[Trajectory], pattern: np.ndarray, offsets: np.ndarray, origin: Origin
) -> Tuple[FragmentBatch, np.ndarray]:
    dim = trajs[0].dim
    n_rows = len(trajs) * offsets.size
    fragments = np.empty((n_rows, pattern.size * dim))
    index_map = np.empty((n_rows, pattern.size), dtype=int)
    row_offsets = np.empty(n_rows, dtype=int)
    source_ids = np.empty(n_rows, dtype=int)
    seeds = np.empty((n_rows, SEED_SLICES, dim))
    row = 0
    for traj in trajs:
        for t_k in offsets:
            idx = t_k + pattern
            fragments[row] = traj.values[idx].ravel()
            index_map[row] = idx
            row_offsets[row] = t_k
            source_ids[row] = traj.sample_id
            seeds[row] = traj.values[t_k : t_k + SEED_SLICES]
            row += 1
    batch = FragmentBatch(
        fragments=fragments,
        origin=origin,
        slice_index_map=index_map,
        offsets=row_offsets,
        source_ids=source_ids,
        dim=dim,
    )
    return batch, seeds


def extract_fragments(
    trajs: Sequence[Trajectory], spec: ProtocolSpec, origin: Origin = "data"
) -> ProtocolOutput:
    """
    Cut fragments out of trajectories according to a protocol.

    Rows are ordered trajectory-major, then by offset t_k.

    Args:
        trajs: Trajectories sharing dt, N and d
        spec: Protocol
        origin: Provenance tag of the resulting batch

    Returns:
        ProtocolOutput: Fragments and their seed pairs

    Raises:
        FragmentBoundsError: If requested slices leave the horizon
    """
    dt, n_steps, _ = _check_uniform(trajs)
    pattern = spec.relative_pattern(dt, n_steps)
    offsets = spec.offsets(dt, n_steps)
    batch, seeds = _assemble(trajs, pattern, offsets, origin)
    logger.debug(
        "Extracted %d %s fragments of %d slices", len(batch), spec.kind, pattern.size
    )
    return ProtocolOutput(batch=batch, seeds=seeds)


def extract_pattern(
    trajs: Sequence[Trajectory],
    spec: ProtocolSpec,
    data_n_steps: int,
    origin: Origin = "generator",
) -> FragmentBatch:
    """
    Fragments of generated trajectories started from seed pairs.

    Each generated path begins at its seed pair, so the fragment sits at
    offset 0 and follows the same relative pattern as the data fragments
    it is compared with.

    Args:
        trajs: Generated trajectories
        spec: Protocol
        data_n_steps: Horizon N of the data the pattern was derived from
        origin: Provenance tag of the resulting batch
    """
    dt, n_steps, _ = _check_uniform(trajs)
    pattern = spec.relative_pattern(dt, data_n_steps)
    if pattern[-1] > n_steps:
        raise FragmentBoundsError(
            "Generated trajectories are too short for the pattern",
            last_slice=int(pattern[-1]),
            n_steps=n_steps,
        )
    batch, _ = _assemble(trajs, pattern, np.zeros(1, dtype=int), origin)
    return batch


def seed_generator_from(
    output: ProtocolOutput, noise_per_seed: int = 1
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Start-up pairs (X_0, X_1) for the generator, taken verbatim from data.

    Each seed pair is repeated ``noise_per_seed`` times in a row; the copies
    receive independent noise downstream.

    Raises:
        MissingSeedError: If the output carries no seed slices
    """
    if output.seeds is None or output.seeds.size == 0:
        raise MissingSeedError()
    if output.seeds.shape[1] != SEED_SLICES:
        raise MissingSeedError(f"Expected {SEED_SLICES} seed slices per fragment")
    pairs = []
    for seed in output.seeds:
        for _ in range(noise_per_seed):
            pairs.append((seed[0].copy(), seed[1].copy()))
    return pairs
