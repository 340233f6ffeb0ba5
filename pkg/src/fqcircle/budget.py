"""Enumeration limits and the worker pool used by the exhaustive oracles."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

DEFAULT_MAX_ENUM = 4_000_000


class BudgetExceeded(RuntimeError):
    """An exhaustive computation would exceed the configured size limit."""


def check_budget(size: int, limit: int | None, what: str) -> None:
    limit = DEFAULT_MAX_ENUM if limit is None else limit
    if size > limit:
        raise BudgetExceeded(f"{what}: {size} items exceeds the enumeration budget {limit}")


def chunk_ranges(total: int, chunk: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map; results come back in input order whatever the pool size."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
