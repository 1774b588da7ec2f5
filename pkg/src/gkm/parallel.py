"""Thread budget shared by the filtering kernels.

The CLI sets the budget once; library code reads it and never spawns more
workers. Work is split per basis plane so results do not depend on it.
"""

from __future__ import annotations

import contextlib
import contextvars
import os
from concurrent.futures import ThreadPoolExecutor

_budget: contextvars.ContextVar[int] = contextvars.ContextVar("gkm_threads", default=1)


def default_threads() -> int:
    try:
        return max(int(os.environ.get("GKM_THREADS", "1")), 1)
    except ValueError:
        return 1


def get_threads() -> int:
    return _budget.get()


@contextlib.contextmanager
def thread_budget(n: int):
    if n < 1:
        raise ValueError("thread budget must be >= 1")
    token = _budget.set(n)
    try:
        yield
    finally:
        _budget.reset(token)


def pmap(fn, items):
    """``list(map(fn, items))``, fanned out over the current budget."""
    items = list(items)
    n = min(get_threads(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
