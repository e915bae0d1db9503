"""Accuracy metrics of learned models."""

from typing import Dict, Sequence

import numpy as np

from app.core.exception_handling.error_handler import InvalidArgumentError, InvalidBatchError
from app.services.integrators.params import GenModelParams, ParameterLayout
from app.services.integrators.trajectory import Trajectory


def relative_error(estimate: float, truth: float) -> float:
    """|estimate - truth| / |truth|."""
    if truth == 0:
        raise InvalidArgumentError("Relative error is undefined for a zero reference")
    return abs(estimate - truth) / abs(truth)


def relative_errors(
    learned: GenModelParams, target: GenModelParams, layout: ParameterLayout
) -> Dict[str, float]:
    """
    Relative error of every learnable scalar value.

    Entries whose target value is zero are skipped.
    """
    truth = layout.natural_values(target)
    estimates = layout.natural_values(learned)
    return {
        name: relative_error(estimates[name], value)
        for name, value in truth.items()
        if value != 0
    }


def radial_histogram(
    trajs: Sequence[Trajectory], at_step: int, hist_range: float, bin_width: float
) -> np.ndarray:
    """
    Probability mass of |X(at_step)| per bin.

    Bins of width bin_width cover [0, hist_range]; radii beyond it land in a
    final overflow bin so the masses always sum to one.

    Raises:
        InvalidBatchError: If there are no trajectories
        InvalidArgumentError: If at_step is outside the trajectories
    """
    if not trajs:
        raise InvalidBatchError("Cannot build a histogram from an empty batch")
    if not 0 <= at_step <= min(t.n_steps for t in trajs):
        raise InvalidArgumentError("Histogram step outside the trajectories", at_step=at_step)
    n_bins = int(round(hist_range / bin_width))
    radii = np.array([np.linalg.norm(t.values[at_step]) for t in trajs])
    counts, _ = np.histogram(radii, bins=np.linspace(0.0, hist_range, n_bins + 1))
    overflow = np.count_nonzero(radii > hist_range)
    masses = np.append(counts, overflow).astype(float)
    return masses / radii.size


def l1_radial_error(
    gen_trajs: Sequence[Trajectory],
    data_trajs: Sequence[Trajectory],
    at_step: int,
    hist_range: float = 2.5,
    bin_width: float = 0.05,
) -> float:
    """
    Relative L1 distance of the radial distributions at one step.

    Returns sum |h_gen - h_data| / sum h_data over probability-normalised
    histograms, so disjoint supports give 2.
    """
    h_gen = radial_histogram(gen_trajs, at_step, hist_range, bin_width)
    h_data = radial_histogram(data_trajs, at_step, hist_range, bin_width)
    return float(np.abs(h_gen - h_data).sum() / h_data.sum())
