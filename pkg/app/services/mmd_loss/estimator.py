"""
Unbiased MMD^2 between generated and observed fragments, and its gradient.

    l = 1/(N(N-1)) sum_{i != j} k(X_i, X_j)
        - 2/(NM) sum_{i, j} k(X_i, Y_j)
        + 1/(M(M-1)) sum_{i != j} k(Y_i, Y_j)

Only the generated fragments X depend on the parameters. Their cotangent
dl/dX_i is scattered back onto the slices of the generating trajectory and
pulled through the integrator with one adjoint solve per sample.
"""

from typing import Optional, Sequence

import numpy as np

from app.core.concurrency.workers import WorkerPool
from app.core.exception_handling.error_handler import (
    InvalidBatchError,
    ProvenanceMismatchError,
)
from app.core.logging.logger import get_logger
from app.services.adjoint.solver import adjoint_gradient
from app.services.integrators.params import GenModelParams, ParameterLayout
from app.services.integrators.trajectory import Trajectory
from app.services.kernels.rational_quadratic import (
    KernelConfig,
    rqk_grad1_row_sums,
    rqk_pair_sum,
)
from app.services.mmd_loss.batch import FragmentBatch

logger = get_logger(__name__)


def _check_sizes(gen: FragmentBatch, data: FragmentBatch) -> None:
    if len(gen) < 2 or len(data) < 2:
        raise InvalidBatchError(
            "Unbiased MMD needs at least two fragments per batch",
            n_gen=len(gen),
            n_data=len(data),
        )


def check_alignment(gen: FragmentBatch, data: FragmentBatch) -> None:
    """
    Assert both batches compare the same relative slice pattern.

    Raises:
        InvalidBatchError: If the patterns or dimensions differ
    """
    if gen.dim != data.dim:
        raise InvalidBatchError("Batches differ in dimension", gen=gen.dim, data=data.dim)
    gen_pattern = gen.relative_pattern()
    data_pattern = data.relative_pattern()
    if gen_pattern.shape != data_pattern.shape or not np.array_equal(gen_pattern, data_pattern):
        raise InvalidBatchError(
            "Generated and observed fragments use different slice patterns",
            gen=gen_pattern.tolist(),
            data=data_pattern.tolist(),
        )


def mmd2_unbiased(
    gen: FragmentBatch,
    data: FragmentBatch,
    cfg: KernelConfig,
    pool: Optional[WorkerPool] = None,
) -> float:
    """
    Unbiased estimate of MMD^2; may be negative.

    Args:
        gen: Generated fragments X (N rows)
        data: Observed fragments Y (M rows)
        cfg: Kernel parameters
        pool: Optional worker pool for the pair sums

    Returns:
        float: The estimate

    Raises:
        InvalidBatchError: If either batch has fewer than two fragments
    """
    _check_sizes(gen, data)
    xs, ys = gen.fragments, data.fragments
    n, m = len(gen), len(data)
    xx = rqk_pair_sum(xs, xs, cfg, exclude_diagonal=True, pool=pool)
    xy = rqk_pair_sum(xs, ys, cfg, pool=pool)
    yy = rqk_pair_sum(ys, ys, cfg, exclude_diagonal=True, pool=pool)
    return xx / (n * (n - 1)) - 2.0 * xy / (n * m) + yy / (m * (m - 1))


def fragment_cotangents(gen: FragmentBatch, data: FragmentBatch, cfg: KernelConfig) -> np.ndarray:
    """
    dl/dX_i for every generated fragment, shape (N, S * d).

    The XX term contributes 2 c1(i) / (N(N-1)) since the kernel is
    symmetric; the XY term contributes -2 c~1(i) / (NM); YY has no X.
    """
    _check_sizes(gen, data)
    n, m = len(gen), len(data)
    c1 = rqk_grad1_row_sums(gen.fragments, gen.fragments, cfg, exclude_diagonal=True)
    c1_cross = rqk_grad1_row_sums(gen.fragments, data.fragments, cfg)
    return 2.0 * c1 / (n * (n - 1)) - 2.0 * c1_cross / (n * m)


def scatter_cotangent(row: np.ndarray, slice_map: np.ndarray, traj: Trajectory) -> np.ndarray:
    """Spread one fragment cotangent onto the slices it was cut from."""
    g_x = np.zeros_like(traj.values)
    blocks = row.reshape(slice_map.size, traj.dim)
    for idx, block in zip(slice_map, blocks):
        g_x[idx] += block
    return g_x


def _check_provenance(gen: FragmentBatch, gen_trajs: Sequence[Trajectory]) -> None:
    if gen.origin != "generator":
        raise ProvenanceMismatchError("Gradient requires generator fragments", origin=gen.origin)
    if len(gen_trajs) != len(gen):
        raise ProvenanceMismatchError(
            "One generated trajectory per fragment is required",
            n_fragments=len(gen),
            n_trajs=len(gen_trajs),
        )
    ids = np.array([t.sample_id for t in gen_trajs])
    if not np.array_equal(ids, gen.source_ids):
        raise ProvenanceMismatchError("Fragments and trajectories are not in the same order")


def mmd2_grad(
    gen: FragmentBatch,
    gen_trajs: Sequence[Trajectory],
    data: FragmentBatch,
    p: GenModelParams,
    cfg: KernelConfig,
    layout: ParameterLayout,
    pool: Optional[WorkerPool] = None,
) -> np.ndarray:
    """
    Gradient of ``mmd2_unbiased`` in the learnable parameters.

    Args:
        gen: Generated fragments, row i cut from gen_trajs[i]
        gen_trajs: The generated trajectories, in batch order
        data: Observed fragments
        p: Parameters the generator ran with
        cfg: Kernel parameters
        layout: Learnable channels (optimizer coordinates)
        pool: Worker pool for the per-sample adjoint solves

    Returns:
        np.ndarray: Gradient of length layout.size

    Raises:
        ProvenanceMismatchError: If gen does not come from gen_trajs
        InvalidBatchError: If the batches are too small or misaligned
    """
    _check_provenance(gen, gen_trajs)
    check_alignment(gen, data)
    cotangents = fragment_cotangents(gen, data, cfg)

    def per_sample(i: int) -> np.ndarray:
        traj = gen_trajs[i]
        g_x = scatter_cotangent(cotangents[i], gen.slice_index_map[i], traj)
        return adjoint_gradient(traj, p, g_x, layout)

    runner = pool or WorkerPool(1)
    grad = np.zeros(layout.size)
    for part in runner.map(per_sample, range(len(gen))):
        grad += part
    return grad
