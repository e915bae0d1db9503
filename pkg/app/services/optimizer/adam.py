"""
ADAM updates over the flat learnable vector.

Positive channels live in log coordinates in that vector (see
ParameterLayout), so the update itself never needs to clip.
"""

from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from app.core.exception_handling.error_handler import InvalidArgumentError, OptimizerHaltError

Schedule = Literal["constant", "linear"]


@dataclass(frozen=True, eq=False)
class AdamState:
    """Moments, step count and hyperparameters of one ADAM run."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    schedule: Schedule = "constant"
    total_steps: Optional[int] = None
    labels: Sequence[str] = field(default_factory=tuple)

    @classmethod
    def fresh(cls, size: int, **hyper) -> "AdamState":
        """Zero moments for a vector of the given length."""
        return cls(first_moment=np.zeros(size), second_moment=np.zeros(size), **hyper)

    def current_lr(self) -> float:
        """Rate applied at the next step."""
        if self.schedule == "linear" and self.total_steps:
            return self.lr * max(0.0, 1.0 - self.step_count / self.total_steps)
        return self.lr


def adam_step(
    state: AdamState, params, grad, epoch: Optional[int] = None
) -> Tuple[AdamState, np.ndarray]:
    """
    One bias-corrected ADAM update.

    Args:
        state: Optimizer state
        params: Learnable vector (optimizer coordinates)
        grad: Gradient in the same coordinates
        epoch: Epoch reported if the update halts

    Returns:
        Tuple[AdamState, np.ndarray]: New state and updated parameters

    Raises:
        OptimizerHaltError: If the gradient has a non-finite entry
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or grad.shape != state.first_moment.shape:
        raise InvalidArgumentError(
            "Gradient, parameters and moments must have the same length",
            grad=list(grad.shape),
            params=list(params.shape),
        )
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        i = int(bad[0])
        label = state.labels[i] if i < len(state.labels) else f"param[{i}]"
        raise OptimizerHaltError(channel=label, epoch=epoch)

    lr = state.current_lr()
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    updated = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, first_moment=m, second_moment=v, step_count=t), updated
