"""Worker-count plumbing for the parallel kernels.

A "worker" maps to a numba thread.  Requests above the host's thread budget
clamp to it; per-seed results are bit-identical for any worker count, so the
clamp never changes outputs.
"""

from __future__ import annotations

import contextlib

import numba


def resolve_workers(workers: int | None) -> int:
    limit = numba.config.NUMBA_NUM_THREADS
    if workers is None:
        return limit
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return min(workers, limit)


@contextlib.contextmanager
def worker_count(workers: int | None):
    target = resolve_workers(workers)
    previous = numba.get_num_threads()
    numba.set_num_threads(target)
    try:
        yield target
    finally:
        numba.set_num_threads(previous)
