"""
Deterministic fan-out of per-sample work.

Random streams are derived from ``(master_seed, stream, *key)`` through
``numpy.random.SeedSequence`` spawn keys, so the draws a sample sees do not
depend on which worker runs it. ``WorkerPool.map`` returns results in item
order and callers reduce that list in order, which keeps every sum
independent of the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

from app.core.configuration.config import settings

T = TypeVar("T")
R = TypeVar("R")

# Named random streams
STREAM_DATA = 0
STREAM_BATCH = 1
STREAM_GENERATOR = 2
STREAM_EVALUATION = 3
STREAM_INIT = 4


def sample_rng(master_seed: int, stream: int, *key: int) -> np.random.Generator:
    """
    Build the random generator for one sample of one stream.

    Args:
        master_seed: Run-level seed
        stream: One of the STREAM_* constants
        *key: Further non-negative integers identifying the sample
            (e.g. epoch and sample index)

    Returns:
        numpy.random.Generator: Independent, reproducible generator
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), *map(int, key)))
    return np.random.default_rng(seq)


class WorkerPool:
    """Thread pool whose ``map`` preserves item order."""

    def __init__(self, workers: Optional[int] = None):
        if workers is None:
            workers = settings.workers if settings else 1
        self.workers = max(1, int(workers))

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply ``fn`` to every item, returning results in item order."""
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(fn, items))
