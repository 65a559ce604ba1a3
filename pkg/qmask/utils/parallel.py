"""Ordered fan-out over independent tasks."""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

from qmask.core.config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """
    Map ``fn`` over ``items``, results in input order.

    Runs serially when MAX_WORKERS is 1, otherwise on a thread pool of that
    size. numpy releases the GIL inside LAPACK calls, which is where the
    work goes.
    """
    items = list(items)
    workers = get_settings().MAX_WORKERS
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def spawn_seeds(seed: int, count: int, *key: int) -> List[np.random.SeedSequence]:
    """``count`` child seeds of ``seed``, optionally namespaced by ``key``."""
    spawn_key = tuple(int(k) for k in key)
    root = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return root.spawn(count)
