"""Shared numerics: datasets, seeded random streams and stable log-space helpers."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

VAR_FLOOR = 1e-12


class ConfigError(ValueError):
    """Invalid model, truncation or schedule configuration."""


class DataError(ValueError):
    """Malformed or incompatible input data."""


class NumericalError(ArithmeticError):
    """Training produced a non-finite objective."""


class StateExplosionError(ConfigError):
    """The truncated state set would exceed the configured cap."""


def log_sum_exp(v, axis=None):
    """Compute ``log(sum(exp(v)))`` with a max shift.

    Works on arbitrary arrays; with ``axis=None`` the whole array is reduced.
    Raises ``ValueError("empty support")`` if every entry along the reduced
    axis is ``-inf``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty support")
    vmax = np.max(v, axis=axis, keepdims=True)
    if np.any(np.isneginf(vmax)):
        raise ValueError("empty support")
    out = np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True)) + vmax
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


class RngStream:
    """Thin wrapper around a PCG64 generator with the draws the models need."""

    algorithm = "PCG64"

    def __init__(self, seed, shard=None):
        entropy = [int(seed)] if shard is None else [int(seed), int(shard)]
        self.seed = int(seed)
        self.shard = shard
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def uniform(self, size=None, low=0.0, high=1.0):
        return self.generator.uniform(low, high, size)

    def normal(self, size=None, loc=0.0, scale=1.0):
        return self.generator.normal(loc, scale, size)

    def bernoulli(self, p, size=None):
        return (self.generator.random(size) < p).astype(np.float64)

    def categorical(self, probs, size=None):
        probs = np.asarray(probs, dtype=np.float64)
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        u = self.generator.random(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)

    def poisson(self, lam, size=None):
        return self.generator.poisson(lam, size)

    def spawn(self, shard):
        """Independent stream derived from ``(seed, shard)``."""
        return RngStream(self.seed, shard)


def seeded_rng(seed):
    return RngStream(seed)


@dataclass(frozen=True)
class DataSet:
    """N observations stored row-wise; ``kind`` is ``"real"`` or ``"count"``."""

    y: np.ndarray
    kind: str = "real"

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64, order="C")
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2:
            raise DataError(f"data must be 2-D, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise DataError("data contains non-finite entries")
        if self.kind not in ("real", "count"):
            raise DataError(f"unknown data kind {self.kind!r}")
        if self.kind == "count" and not is_count_data(y):
            raise DataError("count data must hold non-negative whole numbers")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def N(self):
        return self.y.shape[0]

    @property
    def D(self):
        return self.y.shape[1]

    def rows(self, start, stop):
        return DataSet(self.y[start:stop], self.kind)


def is_count_data(y):
    y = np.asarray(y)
    return bool(np.all(y >= 0) and np.all(y == np.round(y)))


def as_dataset(data, kind=None):
    """Accept a DataSet, an array, or a mapping with key ``"y"``."""
    if isinstance(data, DataSet):
        if kind is not None and kind != data.kind:
            return DataSet(data.y, kind)
        return data
    if isinstance(data, Mapping):
        data = data["y"]
    return DataSet(np.asarray(data, dtype=np.float64), kind or "real")


def mean_variance(y):
    """Mean per-dimension variance of the data, floored at ``VAR_FLOOR``."""
    var = float(np.mean(np.var(y, axis=0)))
    if var < VAR_FLOOR:
        warnings.warn("data has (near) zero variance; flooring at 1e-12", RuntimeWarning, stacklevel=2)
        var = VAR_FLOOR
    return var
