"""
Ordered data-parallel map over independent work items (bands, dual-lattice
points, probes). Results always come back in input order so every reduction
downstream is performed in a fixed order.
"""
from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

from wavepacket_frames.config import settings

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """Apply ``func`` to every item on joblib's thread backend, preserving order."""
    items = list(items)
    workers = max_workers if max_workers is not None else settings.max_workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=min(workers, len(items)), prefer="threads")(delayed(func)(item) for item in items)
