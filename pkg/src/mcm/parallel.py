"""Order-preserving parallel map over independent, seeded work items.

Every work item carries its own seed, so results depend only on the
items and never on how many worker processes run them.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "MCM_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def pmap(fn, items, workers: int | None = None) -> list:
    """[fn(x) for x in items], optionally spread over processes."""
    items = list(items)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def chunks(total: int, parts: int) -> list[tuple[int, int]]:
    """Split range(total) into at most ``parts`` contiguous (start, count) pieces."""
    parts = max(1, min(parts, total)) if total else 1
    base, extra = divmod(total, parts)
    out, start = [], 0
    for k in range(parts):
        cnt = base + (k < extra)
        if cnt:
            out.append((start, cnt))
        start += cnt
    return out
