import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Worker cap from ``DIBM_THREADS``; 0 or unset means one per CPU."""
    raw = os.environ.get("DIBM_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DIBM_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"DIBM_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def parallel_map(fn, items):
    """Order-preserving map over ``items`` on a thread pool."""
    items = list(items)
    workers = min(worker_count(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
