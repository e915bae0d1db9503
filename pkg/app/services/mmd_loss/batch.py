"""Fragment batches compared by the MMD loss."""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from app.core.exception_handling.error_handler import InvalidArgumentError, InvalidBatchError

Origin = Literal["generator", "data"]


@dataclass(frozen=True, eq=False)
class FragmentBatch:
    """
    Flattened trajectory fragments with their provenance.

    Attributes:
        fragments: (n, S * d) array, row i the concatenation of S slices
        origin: Whether the rows came from the generator or from data
        slice_index_map: (n, S) trajectory slice index of every block of d
            coordinates
        offsets: (n,) start index t_k the row was taken at
        source_ids: (n,) sample_id of the source trajectory
        dim: Spatial dimension d
    """

    fragments: np.ndarray
    origin: Origin
    slice_index_map: np.ndarray
    offsets: np.ndarray
    source_ids: np.ndarray
    dim: int

    def __post_init__(self):
        n, width = self.fragments.shape
        if self.slice_index_map.shape[0] != n or width != self.slice_index_map.shape[1] * self.dim:
            raise InvalidArgumentError(
                "slice_index_map is inconsistent with the fragment length",
                fragments=[n, width],
                slice_index_map=list(self.slice_index_map.shape),
                dim=self.dim,
            )
        if self.offsets.shape != (n,) or self.source_ids.shape != (n,):
            raise InvalidArgumentError("offsets and source_ids need one entry per fragment")

    def __len__(self) -> int:
        return self.fragments.shape[0]

    @property
    def n_slices(self) -> int:
        """Slices per fragment."""
        return self.slice_index_map.shape[1]

    def relative_pattern(self) -> np.ndarray:
        """
        Slice indices relative to each row's offset, shared by every row.

        Raises:
            InvalidBatchError: If rows follow different patterns
        """
        rel = self.slice_index_map - self.offsets[:, None]
        if len(self) and not np.all(rel == rel[0]):
            raise InvalidBatchError("Fragments in a batch follow different slice patterns")
        return rel[0] if len(self) else np.zeros(0, dtype=int)

    def take(self, rows: Sequence[int], origin: Optional[Origin] = None) -> "FragmentBatch":
        """Sub-batch of the given rows, in the given order."""
        rows = np.asarray(rows, dtype=int)
        return FragmentBatch(
            fragments=self.fragments[rows],
            origin=origin or self.origin,
            slice_index_map=self.slice_index_map[rows],
            offsets=self.offsets[rows],
            source_ids=self.source_ids[rows],
            dim=self.dim,
        )
