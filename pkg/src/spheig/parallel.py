"""Deterministic order-preserving parallel map for independent solves."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def n_threads() -> int:
    """Worker count: SPHEIG_THREADS when set, else min(8, cpu count)."""
    env = os.environ.get("SPHEIG_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def pmap(fn, items):
    """Map preserving input order; concurrent when more than one worker."""
    items = list(items)
    workers = min(n_threads(), len(items)) if items else 1
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
