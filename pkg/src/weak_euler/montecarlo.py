"""Deterministic block-parallel Monte Carlo.

Work is cut into the RNG blocks of :mod:`grids`; each block is an
independent task and results are concatenated in block order, so output is
bit-identical for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .grids import BLOCK_SIZE

_DEFAULT_THREADS = None


def default_threads() -> int:
    if _DEFAULT_THREADS is not None:
        return _DEFAULT_THREADS
    return os.cpu_count() or 1


def set_default_threads(n: int | None):
    global _DEFAULT_THREADS
    _DEFAULT_THREADS = None if n is None else max(1, int(n))


def block_ranges(n_paths: int, first: int = 0):
    """``(first_path, count)`` pieces aligned to RNG blocks."""
    out = []
    start, stop = first, first + n_paths
    while start < stop:
        end = min(stop, (start // BLOCK_SIZE + 1) * BLOCK_SIZE)
        out.append((start, end - start))
        start = end
    return out


def run_blocks(task, n_paths: int, threads: int | None = None, first: int = 0) -> dict:
    """Call ``task(first_path, count) -> dict of arrays`` on every block and
    concatenate each entry along its last axis, in block order."""
    pieces = block_ranges(n_paths, first)
    threads = threads or default_threads()
    if threads == 1 or len(pieces) == 1:
        results = [task(a, c) for a, c in pieces]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: task(*p), pieces))
    return {key: np.concatenate([np.atleast_1d(r[key]) for r in results], axis=-1) for key in results[0]}


def mean_and_stderr(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    mean = float(np.mean(x))
    if m < 2:
        return mean, float("nan")
    return mean, float(np.std(x, ddof=1) / np.sqrt(m))
