"""
Trajectory records and their on-disk format.

Positions go to a CSV with columns sample_id, step, t, x1..xd; the unit
normal draws that drove each path go to an ``.npz`` sidecar next to it so a
stored path can be replayed exactly.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.exception_handling.error_handler import InvalidArgumentError
from app.core.logging.logger import get_logger

logger = get_logger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    One sampled path X_0..X_N with the noise that produced it.

    Attributes:
        values: (N + 1, d) positions
        noise: (N, d) unit normals; row j - 1 holds xi_j
        dt: Time step
        seed: Seed of the generating stream, if any
        sample_id: Index of the realization within its batch
    """

    values: np.ndarray
    noise: np.ndarray
    dt: float
    seed: Optional[int] = None
    sample_id: int = 0

    @property
    def n_steps(self) -> int:
        """Number of steps N."""
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        """Spatial dimension d."""
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        """Time stamps of the slices."""
        return np.arange(self.n_steps + 1) * self.dt


def _noise_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".noise.npz")


def write_trajectories(trajs: Sequence[Trajectory], csv_path) -> Path:
    """
    Write trajectories to CSV with a noise sidecar.

    Args:
        trajs: Trajectories sharing dt, N and d
        csv_path: Target CSV path

    Returns:
        Path: The CSV path written
    """
    csv_path = Path(csv_path)
    if not trajs:
        raise InvalidArgumentError("No trajectories to write")
    shapes = {t.values.shape for t in trajs}
    if len(shapes) != 1:
        raise InvalidArgumentError("Trajectories must share their shape", shapes=sorted(shapes))
    dim = trajs[0].dim
    frames = []
    for traj in trajs:
        frame = pd.DataFrame(traj.values, columns=[f"x{i + 1}" for i in range(dim)])
        frame.insert(0, "t", traj.times)
        frame.insert(0, "step", np.arange(traj.n_steps + 1))
        frame.insert(0, "sample_id", traj.sample_id)
        frames.append(frame)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(
        csv_path, index=False, float_format=CSV_FLOAT_FORMAT
    )
    np.savez(
        _noise_path(csv_path),
        noise=np.stack([t.noise for t in trajs]),
        seeds=np.array([-1 if t.seed is None else t.seed for t in trajs]),
        sample_ids=np.array([t.sample_id for t in trajs]),
        dt=np.array(trajs[0].dt),
    )
    logger.info("Wrote %d trajectories to %s", len(trajs), csv_path)
    return csv_path


def read_trajectories(csv_path) -> List[Trajectory]:
    """Read trajectories written by ``write_trajectories``."""
    csv_path = Path(csv_path)
    frame = pd.read_csv(csv_path, float_precision="round_trip")
    sidecar = np.load(_noise_path(csv_path))
    x_cols = [c for c in frame.columns if c.startswith("x")]
    dt = float(sidecar["dt"])
    trajs = []
    for k, (sample_id, group) in enumerate(frame.groupby("sample_id", sort=False)):
        seed = int(sidecar["seeds"][k])
        trajs.append(
            Trajectory(
                values=group.sort_values("step")[x_cols].to_numpy(dtype=float),
                noise=np.asarray(sidecar["noise"][k], dtype=float),
                dt=dt,
                seed=None if seed < 0 else seed,
                sample_id=int(sample_id),
            )
        )
    return trajs
