"""Worker pool sizing and deterministic task dispatch.

Studies split path ranges into tasks that write into disjoint slices of
preallocated arrays; reductions happen once, after every task finished, over
arrays laid out in path order. Results are therefore byte-identical for any
worker count, including 1.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

from .errors import DomainError

__all__ = ["worker_count", "run_tasks"]

_ENV_VAR = "PATHCALC_THREADS"


def worker_count() -> int:
    """Worker cap from the environment, defaulting to the machine's cores."""
    raw = os.environ.get(_ENV_VAR)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{_ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"{_ENV_VAR} must be at least 1, got {n}")
    return n


def run_tasks(tasks: Sequence[Callable[[], None]], workers: int | None = None) -> None:
    """Run the tasks to completion, using up to worker_count() threads.

    Exceptions propagate in task order. Tasks must not share mutable state
    except disjoint output slices.
    """
    if not tasks:
        return
    w = min(workers if workers is not None else worker_count(), len(tasks))
    if w <= 1:
        for task in tasks:
            task()
        return
    with ThreadPoolExecutor(max_workers=w) as pool:
        futures = [pool.submit(task) for task in tasks]
        for future in futures:
            future.result()
