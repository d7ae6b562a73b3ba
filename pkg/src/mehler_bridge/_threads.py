"""Optional worker-pool parallelism for grid evaluations.

Work is split into contiguous row blocks; each block writes its own
slice of a preallocated output, so results are independent of the
thread count by construction.
"""

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "run_row_blocks"]

_DEFAULT_BLOCK = 512


def thread_count(explicit=None) -> int:
    """Worker count: explicit argument, else MB_THREADS, else 1."""
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("MB_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_row_blocks(n_rows: int, fill, threads=None, block: int = _DEFAULT_BLOCK):
    """Invoke fill(i0, i1) over [0, n_rows) in blocks, possibly threaded."""
    spans = [(i, min(i + block, n_rows)) for i in range(0, n_rows, block)]
    workers = thread_count(threads)
    if workers == 1 or len(spans) == 1:
        for i0, i1 in spans:
            fill(i0, i1)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda s: fill(*s), spans))
