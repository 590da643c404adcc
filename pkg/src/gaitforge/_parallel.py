"""Bounded, order-preserving parallel map for independent work items."""

import os
from concurrent.futures import ThreadPoolExecutor


def default_jobs():
    env = os.environ.get("GAITFORGE_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def parallel_map(fn, items, jobs=None):
    """Map preserving input order; threads suit the numpy-bound work here."""
    jobs = jobs or default_jobs()
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
