import logging
from typing import Callable, Iterable, List

from joblib import Parallel, delayed

log = logging.getLogger(__name__)


def ordered_map(func: Callable, items: Iterable, n_jobs: int = 1) -> List:
    """Apply `func` to every item on a thread pool, results in submission order."""
    items = list(items)
    if n_jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    log.debug(f"Dispatching {len(items)} jobs to {n_jobs} threads")
    pool = Parallel(n_jobs=n_jobs, backend="threading")
    return pool(delayed(func)(item) for item in items)
