"""Truncated latent state sets and normalized expectations over them.

For each data point a candidate set ``I`` of ``Hprime`` latent units is picked
from model-supplied scores.  The state set then holds the all-zero state, every
singleton over *all* ``H`` units (each non-zero value), and every configuration
with 2..gamma active units whose support lies inside ``I``.

Enumeration order is fixed: zero state, singletons by (unit, value), then
multi-active states by active count, support (lexicographic) and values
(lexicographic over the sorted alphabet).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from .core import ConfigError, StateExplosionError, log_sum_exp

DEFAULT_MAX_STATES = 10**6


@dataclass(frozen=True)
class TruncationConfig:
    H: int
    Hprime: int
    gamma: int
    max_states: int = DEFAULT_MAX_STATES

    def __post_init__(self):
        if self.H < 1:
            raise ConfigError("H must be >= 1")
        if not 1 <= self.Hprime <= self.H:
            raise ConfigError(f"Hprime must lie in [1, H={self.H}], got {self.Hprime}")
        if not 1 <= self.gamma <= self.Hprime:
            raise ConfigError(f"gamma must lie in [1, Hprime={self.Hprime}], got {self.gamma}")

    def n_states(self, n_values=1):
        return count_states(self.H, self.Hprime, self.gamma, n_values)

    @property
    def exact(self):
        """True when the state set covers the whole binary latent space."""
        return self.Hprime == self.H and self.gamma == self.H


def count_states(H, Hprime, gamma, n_values=1):
    return 1 + H * n_values + sum(comb(Hprime, k) * n_values**k for k in range(2, gamma + 1))


@dataclass(frozen=True)
class StateSet:
    candidates: np.ndarray
    states: np.ndarray

    def __len__(self):
        return self.states.shape[0]


@dataclass
class TruncatedPosterior:
    q: np.ndarray
    log_partition: float
    expectations: dict = field(default_factory=dict)


def select_candidates(scores, Hprime):
    """Indices of the ``Hprime`` largest scores, ties toward smaller index, sorted."""
    scores = np.asarray(scores, dtype=np.float64)
    return select_candidates_batch(scores[None, :], Hprime)[0]


def select_candidates_batch(scores, Hprime):
    scores = np.asarray(scores, dtype=np.float64)
    H = scores.shape[-1]
    if Hprime > H or Hprime < 1:
        raise ConfigError(f"Hprime={Hprime} must lie in [1, H={H}]")
    if not np.all(np.isfinite(scores)):
        raise ValueError("selection scores must be finite")
    order = np.argsort(-scores, axis=-1, kind="stable")[..., :Hprime]
    return np.sort(order, axis=-1)


def _check_values(values):
    values = np.asarray(sorted(float(v) for v in values), dtype=np.float64)
    if values.size == 0:
        raise ConfigError("need at least one non-zero latent value")
    if np.any(values == 0.0):
        raise ConfigError("non-zero alphabet must not contain 0")
    if np.unique(values).size != values.size:
        raise ConfigError("latent values must be distinct")
    return values


@lru_cache(maxsize=64)
def _multi_template(Hprime, gamma, values):
    """Multi-active states over local candidate positions, shape (M, Hprime)."""
    rows = []
    for k in range(2, gamma + 1):
        for support in itertools.combinations(range(Hprime), k):
            for assignment in itertools.product(values, repeat=k):
                row = np.zeros(Hprime)
                row[list(support)] = assignment
                rows.append(row)
    if not rows:
        return np.zeros((0, Hprime))
    out = np.array(rows)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _singleton_block(H, values):
    V = len(values)
    block = np.zeros((H * V, H))
    for h in range(H):
        block[h * V:(h + 1) * V, h] = values
    block.setflags(write=False)
    return block


def build_states(candidates, H, gamma, values=(1.0,), max_states=DEFAULT_MAX_STATES):
    """Batched state construction.

    ``candidates`` has shape (B, Hprime); returns an array (B, K, H) where K is
    identical for all rows.
    """
    values = tuple(_check_values(values))
    candidates = np.asarray(candidates, dtype=np.intp)
    B, Hprime = candidates.shape
    K = count_states(H, Hprime, gamma, len(values))
    if K > max_states:
        raise StateExplosionError(f"state explosion: {K} states per data point exceeds cap {max_states}")
    template = _multi_template(Hprime, gamma, values)
    singles = _singleton_block(H, values)
    states = np.zeros((B, K, H))
    states[:, 1:1 + singles.shape[0], :] = singles
    M = template.shape[0]
    if M:
        multi = np.zeros((B, M, H))
        multi[np.arange(B)[:, None, None], np.arange(M)[None, :, None], candidates[:, None, :]] = template[None]
        states[:, 1 + singles.shape[0]:, :] = multi
    return states


def enumerate_binary_states(I, H, gamma):
    return enumerate_valued_states(I, H, gamma, (1.0,))


def enumerate_valued_states(I, H, gamma, values, max_states=DEFAULT_MAX_STATES):
    I = np.asarray(I, dtype=np.intp)
    if np.any(np.diff(I) <= 0):
        raise ConfigError("candidate set must be sorted and free of duplicates")
    if not 1 <= gamma <= max(len(I), 1):
        raise ConfigError("gamma must lie in [1, |I|]")
    if len(I) and (I[0] < 0 or I[-1] >= H):
        raise ConfigError("candidate index out of range")
    states = build_states(I[None, :], H, gamma, values, max_states)[0]
    return StateSet(I, states)


def posterior_weights(log_joints, T=1.0):
    """Annealed normalized weights over the last axis plus the T=1 log-partition.

    Returns ``(q, log_partition)``; ``q`` follows ``exp(log_joints / T)``
    while the log-partition is always that of the untempered joints.
    """
    if T < 1.0:
        raise ConfigError("temperature must be >= 1")
    log_joints = np.asarray(log_joints, dtype=np.float64)
    log_partition = log_sum_exp(log_joints, axis=-1)
    if T == 1.0:
        q = np.exp(log_joints - np.expand_dims(log_partition, -1))
    else:
        scaled = log_joints / T
        q = np.exp(scaled - np.expand_dims(log_sum_exp(scaled, axis=-1), -1))
    return q, log_partition


def truncated_expectations(log_joints, T=1.0, stats=None):
    """Posterior over a single state set.

    ``stats`` maps a name to per-state values (leading axis = states); the
    returned posterior carries ``sum_i q_i stats[name][i]`` for each.
    """
    log_joints = np.asarray(log_joints, dtype=np.float64)
    if log_joints.ndim != 1 or log_joints.size == 0:
        raise ValueError("log_joints must be a non-empty vector")
    if not np.all(np.isfinite(log_joints)):
        raise ValueError("log_joints must be finite")
    q, logz = posterior_weights(log_joints, T)
    expectations = {}
    for name, values in (stats or {}).items():
        values = np.asarray(values, dtype=np.float64)
        expectations[name] = np.tensordot(q, values, axes=(0, 0))
    return TruncatedPosterior(q=q, log_partition=float(logz), expectations=expectations)
