"""Process-pool helper for the per-k sweeps.

Work is split into contiguous index chunks; each chunk is computed whole by
one worker, and results are reassembled in chunk order.  Per-node outputs
are pure functions of the node, so emitted values are bitwise identical for
any worker count.  Workers receive the (small) payload once, through the
pool initializer.
"""

from __future__ import annotations

import multiprocessing as mp
import os

_PAYLOAD = None


def _init_worker(payload):
    global _PAYLOAD
    _PAYLOAD = payload


def _run_task(args):
    fn, chunk = args
    return fn(_PAYLOAD, chunk)


def resolve_threads(threads: int) -> int:
    """0 means one worker per CPU."""
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    return threads if threads > 0 else (os.cpu_count() or 1)


def chunk_ranges(n_items: int, threads: int) -> list[tuple[int, int]]:
    """Contiguous (start, stop) ranges; several chunks per worker for balance."""
    if n_items <= 0:
        return []
    n_chunks = min(n_items, max(1, threads * 8))
    size = -(-n_items // n_chunks)
    return [(i, min(i + size, n_items)) for i in range(0, n_items, size)]


def run_chunked(fn, payload, n_items: int, threads: int) -> list:
    """Apply fn(payload, (start, stop)) over chunks, serially or in a pool."""
    threads = resolve_threads(threads)
    chunks = chunk_ranges(n_items, threads)
    if threads <= 1 or len(chunks) <= 1:
        return [fn(payload, c) for c in chunks]
    try:
        ctx = mp.get_context("fork")
    except ValueError:  # platform without fork: stay serial
        return [fn(payload, c) for c in chunks]
    with ctx.Pool(
        processes=min(threads, len(chunks)),
        initializer=_init_worker,
        initargs=(payload,),
    ) as pool:
        return pool.map(_run_task, [(fn, c) for c in chunks], chunksize=1)
