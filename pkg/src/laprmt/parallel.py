"""Thread-pool execution of independent trials with ordered gathering."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import psutil

T = TypeVar("T")
ENV_THREADS = "LAPRMT_THREADS"


def resolve_threads(threads=None) -> int:
    """Explicit value, else LAPRMT_THREADS, else 1; ``"auto"`` = physical cores."""
    if threads is None:
        threads = os.environ.get(ENV_THREADS, 1)
    if isinstance(threads, str):
        if threads.strip().lower() == "auto":
            return max(1, psutil.cpu_count(logical=False) or os.cpu_count() or 1)
        threads = int(threads)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return int(threads)


def map_trials(fn: Callable[[int], T], trials: int, threads=1) -> list[T]:
    """``[fn(0), ..., fn(trials-1)]``; results keep trial order for any pool size."""
    n = resolve_threads(threads)
    if n == 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, range(trials)))
