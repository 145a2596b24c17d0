"""Ensemble execution and Monte Carlo statistics.

Trajectory ``i`` of an ensemble always consumes noise sub-stream ``i`` of the
master seed, and trajectories are processed in fixed-size batches whose
boundaries do not depend on the worker count. Results are therefore
bit-identical for any number of workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

WORKERS_ENV = "COLLAPSESIM_WORKERS"
DEFAULT_BATCH = 512


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return 1


def batch_ranges(n: int, batch: int = DEFAULT_BATCH) -> list[range]:
    return [range(i, min(i + batch, n)) for i in range(0, n, batch)]


def map_batches(fn: Callable[[range], object], n: int, *, batch: int = DEFAULT_BATCH,
                workers: int | None = None) -> list:
    """Apply ``fn`` to consecutive index batches; results come back in batch order."""
    ranges = batch_ranges(n, batch)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(ranges) == 1:
        return [fn(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, ranges))


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    std: float
    n: int

    @property
    def sem(self) -> float:
        return self.std / math.sqrt(self.n) if self.n > 0 else math.inf

    def within(self, target: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_sigma * self.sem


def mean_estimate(samples: Sequence[float] | np.ndarray, axis: int | None = None):
    s = np.asarray(samples, dtype=float)
    if axis is None:
        s = s.ravel()
        return MeanEstimate(float(s.mean()), float(s.std(ddof=1)) if s.size > 1 else 0.0, s.size)
    n = s.shape[axis]
    return s.mean(axis=axis), s.std(axis=axis, ddof=1) / math.sqrt(n)


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)
