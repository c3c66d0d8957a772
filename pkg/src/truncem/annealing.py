"""Training schedules: iteration budget, posterior temperature and W noise."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError


@dataclass(frozen=True)
class Schedule:
    """Piecewise-linear value over the training budget.

    Anchor positions are fractions of ``max_iterations``; before the first and
    after the last anchor the value is held constant.
    """

    anchors: tuple

    def __post_init__(self):
        anchors = tuple((float(p), float(v)) for p, v in self.anchors)
        if not anchors:
            raise ConfigError("a schedule needs at least one anchor")
        positions = [p for p, _ in anchors]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ConfigError("schedule anchor positions must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for p in positions):
            raise ConfigError("schedule anchor positions must lie in [0, 1]")
        if not all(np.isfinite(v) for _, v in anchors):
            raise ConfigError("schedule values must be finite")
        object.__setattr__(self, "anchors", anchors)

    @classmethod
    def constant(cls, value):
        return cls(((0.0, value),))

    @classmethod
    def coerce(cls, value, default):
        if value is None:
            return cls.constant(default)
        if isinstance(value, Schedule):
            return value
        if np.isscalar(value):
            return cls.constant(value)
        return cls(tuple(value))

    def __call__(self, position):
        xs = [p for p, _ in self.anchors]
        ys = [v for _, v in self.anchors]
        return float(np.interp(position, xs, ys))

    @property
    def is_constant(self):
        return len({v for _, v in self.anchors}) == 1


@dataclass(frozen=True)
class AnnealState:
    iteration: int
    max_iterations: int
    T: float = 1.0
    w_noise_std: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def finished(self):
        return self.iteration >= self.max_iterations

    @property
    def inert(self):
        return self.T == 1.0 and self.w_noise_std == 0.0


class Annealing(ABC):
    """Schedule object advanced by the EM driver; ``next`` and ``reset`` only."""

    state: AnnealState

    @abstractmethod
    def next(self) -> AnnealState: ...

    @abstractmethod
    def reset(self) -> AnnealState: ...

    @property
    def finished(self):
        return self.state.finished

    @property
    def iteration(self):
        return self.state.iteration

    @property
    def T(self):
        return self.state.T

    @property
    def w_noise_std(self):
        return self.state.w_noise_std

    def __getitem__(self, key):
        if key in ("T", "w_noise_std", "iteration", "max_iterations"):
            return getattr(self.state, key)
        return self.state.extras[key]


class LinearAnnealing(Annealing):
    """Fixed budget with piecewise-linear temperature and W-noise schedules.

    >>> anneal = LinearAnnealing(150)
    >>> anneal.T, anneal.w_noise_std
    (1.0, 0.0)

    ``extra`` maps further names (e.g. ``"rho"``) to schedules that models may
    read from the state.
    """

    def __init__(self, max_iterations, T=None, w_noise=None, extra=None):
        if int(max_iterations) < 1:
            raise ConfigError("max_iterations must be >= 1")
        self.max_iterations = int(max_iterations)
        self.T_schedule = Schedule.coerce(T, 1.0)
        self.w_noise_schedule = Schedule.coerce(w_noise, 0.0)
        self.extra_schedules = {k: Schedule.coerce(v, 0.0) for k, v in (extra or {}).items()}
        self.state = self.state_at(0)

    def state_at(self, iteration):
        """Schedule values at ``iteration`` without advancing."""
        position = iteration / self.max_iterations
        T = max(1.0, self.T_schedule(position))
        w_noise = max(0.0, self.w_noise_schedule(position))
        extras = {k: s(position) for k, s in self.extra_schedules.items()}
        return AnnealState(iteration, self.max_iterations, T, w_noise, extras)

    def next(self):
        if self.state.finished:
            raise RuntimeError("annealing schedule already finished")
        self.state = self.state_at(self.state.iteration + 1)
        return self.state

    def reset(self):
        self.state = self.state_at(0)
        return self.state

    def as_dict(self):
        return {
            "type": "LinearAnnealing",
            "max_iterations": self.max_iterations,
            "T": [list(a) for a in self.T_schedule.anchors],
            "w_noise": [list(a) for a in self.w_noise_schedule.anchors],
            "extra": {k: [list(a) for a in s.anchors] for k, s in self.extra_schedules.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["max_iterations"], T=d.get("T"), w_noise=d.get("w_noise"), extra=d.get("extra"))
