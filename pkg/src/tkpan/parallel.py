"""Worker-count control and a deterministic row-block map.

Work is always cut into the same fixed row blocks whatever the worker
count, and partial results are merged in block order, so outputs do not
depend on how many threads ran them.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "TKPAN_THREADS"
ROW_BLOCK = 16

_threads = None


def set_num_threads(n):
    global _threads
    if n is not None and int(n) < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _threads = None if n is None else int(n)


def get_num_threads():
    if _threads is not None:
        return _threads
    env = os.environ.get(ENV_VAR)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be an integer, got {env!r}") from None
        if n >= 1:
            return n
    return os.cpu_count() or 1


def row_blocks(height, block=ROW_BLOCK):
    return [(y0, min(y0 + block, height)) for y0 in range(0, height, block)]


def map_blocks(fn, height, block=ROW_BLOCK):
    """Apply ``fn(y0, y1)`` to each fixed row block; results in block order."""
    blocks = row_blocks(height, block)
    n = min(get_num_threads(), len(blocks))
    if n <= 1:
        return [fn(y0, y1) for y0, y1 in blocks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def map_items(fn, items):
    items = list(items)
    n = min(get_num_threads(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
