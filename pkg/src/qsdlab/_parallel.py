"""Thread-pool map with deterministic output order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    """Worker cap: ``QSDLAB_THREADS`` if set, else the CPU count."""
    env = os.environ.get("QSDLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"QSDLAB_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def ordered_map(fn, items, workers: int | None = None) -> list:
    items = list(items)
    workers = min(workers or max_workers(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
