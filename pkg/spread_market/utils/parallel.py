"""Order-preserving parallel map used by the per-day and per-tree work."""

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

_T = TypeVar("_T")
_R = TypeVar("_R")


def parallel_map(func: Callable[[_T], _R], items: Iterable[_T], jobs: int = 1) -> List[_R]:
    """
    Apply ``func`` to every item and return the results in input order.

    With ``jobs <= 1`` the map runs in-process. Otherwise a spawn-based process pool is used; ``func``
    must then be a picklable module-level callable. Results never depend on ``jobs``.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=min(jobs, len(items)), mp_context=multiprocessing.get_context("spawn")
    ) as executor:
        return list(executor.map(func, items))
