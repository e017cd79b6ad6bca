"""Seed splitting and ensemble execution.

Every random job is addressed by a key path below a master seed, e.g.
``(leg, member)`` or ``(H index, L index, member)``. The generator for a job
is ``default_rng(SeedSequence(master_seed, spawn_key=key))``, so results do
not depend on execution order or on how many workers run the ensemble.
"""

from __future__ import annotations

import os
import secrets
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

THREADS_ENV = "MFCOMP_THREADS"

LEG_KEYS = {
    "original": 0,
    "lm": 1,
    "sf": 2,
    "norm": 3,
    "norm_lm": 4,
    "norm_sf": 5,
    "family": 6,
    "family_lm": 7,
    "family_sf": 8,
    "analysis": 9,
}


def new_master_seed() -> int:
    return secrets.randbits(63)


def job_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def job_seed(master_seed: int, *key: int) -> int:
    """Integer seed for a job, for APIs that take a plain int."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_jobs(fn: Callable, jobs: Sequence | Iterable, workers: int | None = None) -> list:
    """Map ``fn`` over ``jobs`` preserving order; parallel if workers > 1."""
    jobs = list(jobs)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
