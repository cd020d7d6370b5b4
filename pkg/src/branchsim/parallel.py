"""Reproducible replica-parallel execution.

Each replica i draws from its own generator seeded by
SeedSequence(entropy=master_seed, spawn_key=(i,)), so the stream depends only
on (master_seed, i). Results are assembled in replica-index order, making the
output independent of the worker count and of scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

THREADS_ENV_VAR = "BRANCHSIM_THREADS"


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        return max(1, int(value))
    return 1


def replica_rng(master_seed: int, replica_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(replica_index,))
    return np.random.default_rng(seq)


def _run_chunk(task, lo, hi, master_seed):
    return [task(i, replica_rng(master_seed, i)) for i in range(lo, hi)]


def map_replicas(task, n_replicas: int, master_seed: int, threads: int = 1) -> list:
    """[task(i, rng_i) for i in range(n_replicas)], optionally process-parallel.

    task must be picklable (a module-level function or a dataclass with
    __call__); results come back in replica-index order regardless of the
    worker count.
    """
    if threads <= 1 or n_replicas <= 1:
        return _run_chunk(task, 0, n_replicas, master_seed)
    n_chunks = min(n_replicas, 4 * threads)
    bounds = np.linspace(0, n_replicas, n_chunks + 1).astype(int)
    out = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_run_chunk, task, int(lo), int(hi), master_seed)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for fut in futures:  # submission order == replica-index order
            out.extend(fut.result())
    return out
