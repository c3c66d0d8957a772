"""Data-parallel E-step: contiguous row shards, ordered reduction."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


class ShardError(RuntimeError):
    def __init__(self, shard, cause):
        super().__init__(f"E-step failed on shard {shard}: {cause!r}")
        self.shard = shard


class SuffStats:
    """Named additive accumulators plus the number of data points seen.

    The empty instance is the identity of ``combine``; combining with it
    returns the other operand's arrays unchanged (bitwise).
    """

    __slots__ = ("arrays", "n")

    def __init__(self, arrays=None, n=0):
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in (arrays or {}).items()}
        self.n = int(n)

    def __getitem__(self, key):
        return self.arrays[key]

    def __contains__(self, key):
        return key in self.arrays

    def keys(self):
        return self.arrays.keys()

    @property
    def is_identity(self):
        return self.n == 0 and not self.arrays

    def combine(self, other):
        if other.is_identity:
            return self
        if self.is_identity:
            return other
        if self.arrays.keys() != other.arrays.keys():
            raise ValueError("cannot combine statistics with different fields")
        return SuffStats({k: self.arrays[k] + other.arrays[k] for k in self.arrays}, self.n + other.n)

    __add__ = combine

    def to_dict(self):
        return {"n": self.n, **{k: v.copy() for k, v in self.arrays.items()}}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        n = int(d.pop("n"))
        return cls(d, n)

    def __repr__(self):
        return f"SuffStats(n={self.n}, fields={sorted(self.arrays)})"


@dataclass(frozen=True)
class ShardPlan:
    """Contiguous row ranges of near-equal size, processed by ``worker_count`` threads."""

    boundaries: tuple
    worker_count: int = 1

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if len(b) < 2 or b[0] != 0 or any(y < x for x, y in zip(b, b[1:])):
            raise ValueError("shard boundaries must start at 0 and be non-decreasing")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def even(cls, n_rows, n_shards, worker_count=None):
        n_shards = max(1, int(n_shards))
        base, extra = divmod(int(n_rows), n_shards)
        sizes = [base + (1 if i < extra else 0) for i in range(n_shards)]
        return cls(tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist()), worker_count or n_shards)

    @property
    def n_rows(self):
        return self.boundaries[-1]

    @property
    def shards(self):
        return list(zip(self.boundaries[:-1], self.boundaries[1:]))

    def with_workers(self, worker_count):
        return ShardPlan(self.boundaries, worker_count)


def default_workers():
    return os.cpu_count() or 1


def map_reduce(dataset, params, estep_fn, plan=None):
    """Run ``estep_fn(params, shard_dataset)`` per shard and fold results in shard order."""
    if plan is None:
        plan = ShardPlan.even(dataset.N, 1)
    if plan.n_rows != dataset.N:
        raise ValueError(f"shard plan covers {plan.n_rows} rows, dataset has {dataset.N}")

    def work(i, start, stop):
        if stop == start:
            return SuffStats()
        try:
            return estep_fn(params, dataset.rows(start, stop))
        except Exception as exc:
            raise ShardError(i, exc) from exc

    shards = plan.shards
    if plan.worker_count == 1 or len(shards) == 1:
        parts = [work(i, a, b) for i, (a, b) in enumerate(shards)]
    else:
        with ThreadPoolExecutor(max_workers=plan.worker_count) as pool:
            futures = [pool.submit(work, i, a, b) for i, (a, b) in enumerate(shards)]
            parts = [f.result() for f in futures]
    total = SuffStats()
    for part in parts:
        total = total.combine(part)
    return total
