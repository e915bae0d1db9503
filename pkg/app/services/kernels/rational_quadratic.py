"""
Rational-quadratic kernel on flattened trajectory fragments.

k(x, y) = (1 + |x - y|^2 / (2 alpha l^2))^(-alpha)

Pointwise evaluation and first-argument gradients are provided for single
vectors, together with blocked Gram-matrix routines used by the MMD
estimator. Kernel hyperparameters are fixed during training, so no
derivative with respect to (alpha, l) is exposed.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist

from app.core.concurrency.workers import WorkerPool
from app.core.exception_handling.error_handler import InvalidArgumentError

# Rows per Gram block; fixed so reductions do not depend on the worker count.
BLOCK_ROWS = 256


class KernelConfig(BaseModel):
    """Rational-quadratic kernel parameters."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=2.0, gt=0.0)
    length_scale: float = Field(default=0.01, gt=0.0)

    @property
    def scale(self) -> float:
        """Denominator 2 alpha l^2 of the distance ratio."""
        return 2.0 * self.alpha * self.length_scale**2


def _as_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise InvalidArgumentError(
            "Kernel arguments must have the same length",
            x_len=int(x.size),
            y_len=int(y.size),
        )
    return x, y


def rqk_eval(x, y, cfg: KernelConfig) -> float:
    """
    Evaluate the kernel on two vectors.

    Args:
        x: First vector
        y: Second vector of the same length
        cfg: Kernel parameters

    Returns:
        float: Kernel value in (0, 1]

    Raises:
        InvalidArgumentError: If the vectors differ in length
    """
    x, y = _as_pair(x, y)
    diff = x - y
    u = float(diff @ diff) / cfg.scale
    return float((1.0 + u) ** (-cfg.alpha))


def rqk_grad1(x, y, cfg: KernelConfig) -> np.ndarray:
    """
    Gradient of the kernel in its first argument.

    Returns -(1 + u)^(-alpha - 1) (x - y) / l^2 with u the distance ratio.
    """
    x, y = _as_pair(x, y)
    diff = x - y
    u = float(diff @ diff) / cfg.scale
    return -((1.0 + u) ** (-cfg.alpha - 1.0)) * diff / cfg.length_scale**2


def rqk_grad2(x, y, cfg: KernelConfig) -> np.ndarray:
    """Gradient of the kernel in its second argument."""
    return -rqk_grad1(x, y, cfg)


def _check_batches(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if xs.shape[1] != ys.shape[1]:
        raise InvalidArgumentError(
            "Kernel batches must have the same feature length",
            x_len=int(xs.shape[1]),
            y_len=int(ys.shape[1]),
        )
    return xs, ys


def _block_starts(n: int) -> list[int]:
    return list(range(0, n, BLOCK_ROWS))


def rqk_gram(xs, ys, cfg: KernelConfig) -> np.ndarray:
    """
    Gram matrix K[i, j] = k(xs[i], ys[j]).

    Args:
        xs: (n, L) array of flattened fragments
        ys: (m, L) array of flattened fragments
        cfg: Kernel parameters

    Returns:
        np.ndarray: (n, m) Gram matrix
    """
    xs, ys = _check_batches(xs, ys)
    sq = cdist(xs, ys, "sqeuclidean")
    return (1.0 + sq / cfg.scale) ** (-cfg.alpha)


def rqk_pair_sum(
    xs,
    ys,
    cfg: KernelConfig,
    exclude_diagonal: bool = False,
    pool: Optional[WorkerPool] = None,
) -> float:
    """
    Sum of k(xs[i], ys[j]) over all pairs, optionally skipping i == j.

    Rows are processed in fixed blocks; block sums are added in block order.

    Args:
        xs: (n, L) array
        ys: (m, L) array
        cfg: Kernel parameters
        exclude_diagonal: Skip the i == j terms (requires xs and ys to be
            the same sample set)
        pool: Optional worker pool evaluating blocks concurrently

    Returns:
        float: The pair sum
    """
    xs, ys = _check_batches(xs, ys)

    def block_sum(start: int) -> float:
        stop = min(start + BLOCK_ROWS, xs.shape[0])
        gram = rqk_gram(xs[start:stop], ys, cfg)
        if exclude_diagonal:
            rows = np.arange(start, stop)
            mask = np.ones_like(gram, dtype=bool)
            mask[rows - start, rows] = False
            return float(gram[mask].sum())
        return float(gram.sum())

    runner = pool or WorkerPool(1)
    total = 0.0
    for part in runner.map(block_sum, _block_starts(xs.shape[0])):
        total += part
    return total


def rqk_grad1_row_sums(
    xs,
    ys,
    cfg: KernelConfig,
    exclude_diagonal: bool = False,
) -> np.ndarray:
    """
    Row sums of first-argument kernel gradients.

    c[i] = sum_j d1 k(xs[i], ys[j]), skipping j == i when requested.

    Args:
        xs: (n, L) array
        ys: (m, L) array
        cfg: Kernel parameters
        exclude_diagonal: Skip the i == j terms

    Returns:
        np.ndarray: (n, L) array of summed gradients
    """
    xs, ys = _check_batches(xs, ys)
    out = np.empty_like(xs)
    for start in _block_starts(xs.shape[0]):
        stop = min(start + BLOCK_ROWS, xs.shape[0])
        block = xs[start:stop]
        sq = cdist(block, ys, "sqeuclidean")
        weights = (1.0 + sq / cfg.scale) ** (-cfg.alpha - 1.0)
        if exclude_diagonal:
            rows = np.arange(start, stop)
            weights[rows - start, rows] = 0.0
        diffs = block[:, None, :] - ys[None, :, :]
        out[start:stop] = np.einsum("ij,ijl->il", weights, diffs)
    return -out / cfg.length_scale**2
