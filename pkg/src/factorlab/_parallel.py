"""Ordered thread-pool map; the worker count never changes results."""
from concurrent.futures import ThreadPoolExecutor
import os


def worker_count() -> int:
    raw = os.environ.get("FACTORLAB_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn, items):
    """``[fn(x) for x in items]``, possibly computed concurrently."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
