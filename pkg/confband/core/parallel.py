"""
confband Parallel Execution
Order-preserving map over a thread pool
"""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from confband.config import config
from confband.core.errors import BadConfig

T = TypeVar("T")
R = TypeVar("R")

_threads: Optional[int] = None


def set_threads(threads: Optional[int]):
    """Set the worker count; None falls back to config, then to all cores."""
    global _threads
    if threads is not None and threads < 1:
        raise BadConfig(f"threads must be >= 1, got {threads}")
    _threads = threads


def get_threads() -> int:
    if _threads is not None:
        return _threads
    return int(config.get("parallel.threads", 0) or os.cpu_count() or 1)


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """
    Apply fn to every item, possibly in parallel.

    Results come back in input order, so downstream reductions are the same
    for any worker count.
    """
    items = list(items)
    workers = min(get_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
