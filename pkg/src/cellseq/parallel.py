"""Bounded worker-thread mapping for batch computations.

All batch jobs in the package are pure functions over disjoint inputs, so
results are merged in submission order and outputs do not depend on the
worker count.  The bound is process-global, set once by the CLI from
``--jobs`` or the CELLSEQ_JOBS environment variable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_jobs = max(1, int(os.environ.get("CELLSEQ_JOBS", "1") or "1"))


def set_jobs(n: int) -> None:
    global _jobs
    _jobs = max(1, int(n))


def get_jobs() -> int:
    return _jobs


def pmap(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map preserving input order; threads only engaged when jobs > 1."""
    if _jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_jobs) as pool:
        return list(pool.map(fn, items))
