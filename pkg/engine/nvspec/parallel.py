"""Worker pool and seeded random streams for Monte Carlo work."""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

import numpy as np

from .config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_executor: ProcessPoolExecutor | None = None
_executor_workers: int = 0


def resolve_workers(threads: int | None = None) -> int:
    """Return the worker count for ``threads``, falling back to settings and CPU count."""
    if threads is None:
        threads = settings.threads
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def get_executor(workers: int) -> ProcessPoolExecutor:
    """Get or create the shared process pool."""
    global _executor, _executor_workers
    if _executor is not None and _executor_workers != workers:
        close_executor()
    if _executor is None:
        logger.debug(f"Starting process pool with {workers} workers")
        _executor = ProcessPoolExecutor(max_workers=workers)
        _executor_workers = workers
    return _executor


def close_executor() -> None:
    """Shut down the shared process pool."""
    global _executor, _executor_workers
    if _executor is not None:
        _executor.shutdown(wait=True)
        _executor = None
        _executor_workers = 0


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], threads: int | None = None
) -> list[R]:
    """Apply ``fn`` to every item and return the results in input order.

    ``fn`` and the items must be picklable when more than one worker is used.
    """
    work: Sequence[T] = list(items)
    workers = min(resolve_workers(threads), max(1, len(work)))
    if workers == 1:
        return [fn(item) for item in work]
    chunksize = max(1, len(work) // (4 * workers))
    return list(get_executor(workers).map(fn, work, chunksize=chunksize))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the random stream identified by ``key`` under ``master_seed``.

    Streams depend only on (master_seed, key), never on scheduling, so results are
    identical for any worker count.
    """
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(sequence)


def chunk_ranges(total: int, chunk: int) -> list[tuple[int, int]]:
    """Split ``range(total)`` into consecutive ``(start, stop)`` chunks."""
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]
