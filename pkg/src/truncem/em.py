"""Model contract and the EM loop."""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .annealing import AnnealState, Annealing, LinearAnnealing
from .core import NumericalError, as_dataset, seeded_rng, RngStream
from .parallel import map_reduce


def anneal_state(anneal):
    if anneal is None:
        return AnnealState(0, 1)
    if isinstance(anneal, Annealing):
        return anneal.state
    return anneal


class Model(ABC):
    """Base class for all generative models.

    Subclasses provide ``standard_init``, a per-shard ``estep`` returning
    :class:`~truncem.parallel.SuffStats`, an ``mstep``, ``inference`` and
    ``generate``.  ``step`` wires E- and M-step through the parallel module.
    """

    name = "model"
    #: parameter that receives annealing noise
    noisy_param = "W"
    data_kind = "real"

    def __init__(self, D, H):
        self.D = int(D)
        self.H = int(H)

    @abstractmethod
    def standard_init(self, data, rng=None) -> dict: ...

    @abstractmethod
    def estep(self, params, data, T=1.0): ...

    @abstractmethod
    def mstep(self, stats, params) -> dict: ...

    @abstractmethod
    def inference(self, params, data, anneal=None) -> dict: ...

    @abstractmethod
    def generate(self, params, N, rng=None) -> dict: ...

    def exact_log_likelihood(self, params, data):
        raise NotImplementedError(f"{self.name} has no exact likelihood oracle")

    def config(self):
        return {"model": self.name, "D": self.D, "H": self.H}

    def dataset(self, data):
        data = as_dataset(data, self.data_kind)
        if data.D != self.D:
            raise ValueError(f"{self.name} expects D={self.D}, data has D={data.D}")
        return data

    def step(self, anneal, params, data, plan=None):
        """One EM iteration; returns ``(new_params, free_energy)``.

        The free energy is evaluated at the incoming ``params`` (T=1).
        """
        state = anneal_state(anneal)
        data = self.dataset(data)
        T = state.T

        def estep(p, shard):
            return self.estep(p, shard, T=T, anneal=state)

        stats = map_reduce(data, params, estep, plan)
        return self.mstep(stats, params), float(stats["log_partition"])

    def perturb(self, params, noise_std, rng):
        """Additive Gaussian noise scaled by the per-column RMS of the noisy parameter."""
        key = self.noisy_param
        X = params[key]
        rms = np.sqrt(np.mean(X**2, axis=0, keepdims=True))
        out = dict(params)
        out[key] = self.clip_noisy(X + noise_std * rms * rng.normal(size=X.shape))
        return out

    def clip_noisy(self, X):
        return X


@dataclass
class TrainResult:
    params: dict
    free_energy: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)

    @property
    def iterations_run(self):
        return len(self.free_energy)


def run(model, params, data, anneal=None, logger=None, tol=None, plan=None, rng=None, iterations=None):
    """Train ``model`` from ``params``.

    Loops over ``model.step`` until the annealing budget is used up.  With
    ``tol`` set, stops early once annealing is inert and the relative change
    of the free energy drops below ``tol``.
    """
    if anneal is None:
        anneal = LinearAnnealing(iterations or 100)
    if rng is None:
        rng = seeded_rng(0)
    elif not isinstance(rng, RngStream):
        rng = seeded_rng(rng)
    data = model.dataset(data)
    anneal.reset()
    result = TrainResult(params=params)
    while not anneal.finished:
        state = anneal.state
        t0 = time.perf_counter()
        new_params, F = model.step(state, params, data, plan)
        if not np.isfinite(F) or not all(np.all(np.isfinite(v)) for v in new_params.values()):
            if logger is not None:
                logger.abort(state.iteration, F, params)
            raise NumericalError(f"non-finite free energy at iteration {state.iteration}: {F}")
        if state.w_noise_std > 0:
            new_params = model.perturb(new_params, state.w_noise_std, rng)
        seconds = time.perf_counter() - t0
        params = new_params
        result.params = params
        result.free_energy.append(F)
        result.wall_times.append(seconds)
        if logger is not None:
            logger.log(state.iteration, F, seconds, params)
        converged = (
            tol is not None
            and state.inert
            and len(result.free_energy) >= 2
            and abs(F - result.free_energy[-2]) <= tol * (1.0 + abs(F))
        )
        anneal.next()
        if converged:
            break
    return result


class EM:
    """Couples a model, an annealing schedule, parameters and data.

    >>> em = EM(model=model, anneal=anneal, lparams=params, data=y)  # doctest: +SKIP
    >>> em.run()                                                      # doctest: +SKIP
    """

    def __init__(self, model, anneal, lparams=None, data=None, plan=None, rng=None, logger=None, tol=None):
        self.model = model
        self.anneal = anneal
        self.lparams = lparams
        self.data = data
        self.plan = plan
        self.rng = rng
        self.logger = logger
        self.tol = tol
        self.result = None

    def run(self):
        if self.data is None:
            raise ValueError("EM.data must be set before run()")
        if self.lparams is None:
            self.lparams = self.model.standard_init(self.data, self.rng)
        self.result = run(
            self.model, self.lparams, self.data, self.anneal,
            logger=self.logger, tol=self.tol, plan=self.plan, rng=self.rng,
        )
        self.lparams = self.result.params
        return self.result
