"""Replica-level worker pool.

Replicas are pure functions of (master seed, replica index), and
reductions consume results in replica order, so output is identical for
any pool size. Threads suffice: the particle kernel releases the GIL.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
