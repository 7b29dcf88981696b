from __future__ import annotations

__all__ = ["map_tasks"]

from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

_T = TypeVar("_T")
_R = TypeVar("_R")


def map_tasks(fn: Callable[[_T], _R], tasks: Sequence[_T], /, workers: int = 1) -> list[_R]:
    """
    Applies `fn` to every task and returns the results in task order.

    With `workers > 1` the tasks run in a process pool; `fn` and the
    tasks must then be picklable. Every task seeds its own generators,
    so the results do not depend on `workers`.
    """

    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]

    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
