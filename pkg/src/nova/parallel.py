"""Deterministic worker-pool helpers.

Parallelism is capped by the ``NOVA_THREADS`` environment variable
(default 1).  Results are always reduced in input order, so enabling
threads never changes any output bit.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("NOVA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn, items):
    """Map ``fn`` over ``items``, in parallel when NOVA_THREADS > 1.

    The returned list follows the order of ``items`` regardless of
    completion order.
    """
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
