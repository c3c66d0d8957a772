"""Linear superposition with Gaussian noise and discrete priors: BSC, TSC, DSC."""

from __future__ import annotations

import numpy as np

from ..core import ConfigError
from .base import LOG_2PI, SIGMA2_MIN, TruncatedModel, as_rng, clip_pi, residual_variance, solve_dictionary

P_MIN = 1e-9


class DiscreteLinearModel(TruncatedModel):
    """``y = W s + noise`` with ``s_h`` i.i.d. over a finite alphabet containing 0.

    Subclasses define how the per-value prior probabilities are parametrized.
    """

    alphabet = (0.0, 1.0)

    def __init__(self, D, H, Hprime, gamma, max_states=None):
        values = np.asarray(sorted(float(v) for v in self.alphabet))
        if 0.0 not in values:
            raise ConfigError("the latent alphabet must contain 0")
        if np.unique(values).size != values.size:
            raise ConfigError("latent alphabet values must be distinct")
        self.values = values
        self.zero_index = int(np.flatnonzero(values == 0.0)[0])
        self.nonzero_values = tuple(v for v in values if v != 0.0)
        if not self.nonzero_values:
            raise ConfigError("the latent alphabet needs a non-zero value")
        super().__init__(D, H, Hprime, gamma, max_states)

    # -- prior parametrization ------------------------------------------------
    def prior_probs(self, params):
        raise NotImplementedError

    def prior_update(self, counts, N, params):
        raise NotImplementedError

    def neutral_prior(self):
        raise NotImplementedError

    def _value_counts(self, s):
        """Number of entries equal to each alphabet value, over the last axis."""
        s = np.asarray(s)
        out = np.zeros(s.shape[:-1] + (len(self.values),))
        for i, v in enumerate(self.values):
            if i != self.zero_index:
                out[..., i] = np.count_nonzero(s == v, axis=-1)
        out[..., self.zero_index] = s.shape[-1] - out.sum(axis=-1)
        return out

    def log_prior(self, params, s):
        s = np.asarray(s, dtype=np.float64)
        if not np.all(np.isin(s, self.values)):
            raise ValueError(f"latent values outside alphabet {self.values.tolist()}")
        return self._value_counts(s) @ np.log(self.prior_probs(params))

    def log_joint(self, params, y, s):
        """``log p(s) + log N(y; W s, sigma2 I)`` for one point."""
        y = np.asarray(y, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        W, sigma2 = params["W"], params["sigma2"]
        r = y - W @ s
        return float(self.log_prior(params, s) - 0.5 * self.D * (LOG_2PI + np.log(sigma2)) - r @ r / (2 * sigma2))

    def selection_scores(self, params, y):
        W, sigma2 = params["W"], params["sigma2"]
        logp = np.log(self.prior_probs(params))
        yW = np.atleast_2d(y) @ W
        norms = np.sum(W**2, axis=0)
        best = None
        for v in self.nonzero_values:
            vi = int(np.flatnonzero(self.values == v)[0])
            score = (logp[vi] - logp[self.zero_index]) + (2 * v * yW - v * v * norms) / (2 * sigma2)
            best = score if best is None else np.maximum(best, score)
        return best if np.ndim(y) > 1 else best[0]

    def log_joints(self, params, y, states):
        W, sigma2 = params["W"], params["sigma2"]
        logp = np.log(self.prior_probs(params))
        prior = self._value_counts(states) @ logp
        yy = np.sum(y**2, axis=1)
        sWy = np.matmul(states, (y @ W)[:, :, None])[..., 0]
        sWWs = np.sum((states @ (W.T @ W)) * states, axis=-1)
        sq = yy[:, None] - 2.0 * sWy + sWWs
        return prior - 0.5 * self.D * (LOG_2PI + np.log(sigma2)) - sq / (2.0 * sigma2)

    def accumulate(self, params, y, states, q, aux=None, anneal=None):
        mean = np.matmul(q[:, None, :], states)[:, 0, :]
        flat = states.reshape(-1, self.H)
        return {
            "s": mean.sum(axis=0),
            "ss": (flat * q.reshape(-1, 1)).T @ flat,
            "ys": y.T @ mean,
            "yy": np.sum(y**2),
            "counts": q.reshape(-1) @ self._value_counts(states).reshape(-1, len(self.values)),
        }

    def mstep(self, stats, params):
        N, D = stats.n, self.D
        W = solve_dictionary(stats["ys"], stats["ss"], params["W"])
        out = {"W": W, "sigma2": residual_variance(stats["yy"], stats["ys"], stats["ss"], W, N, D)}
        out.update(self.prior_update(stats["counts"], N, params))
        return out

    def standard_init(self, data, rng=None):
        data = self.dataset(data)
        W, var = self.init_dictionary(data.y, as_rng(rng))
        return {"W": W, "sigma2": max(var, SIGMA2_MIN), **self.neutral_prior()}

    def generate(self, params, N, rng=None):
        rng = as_rng(rng)
        idx = rng.categorical(self.prior_probs(params), size=(N, self.H))
        s = self.values[idx]
        y = s @ params["W"].T + np.sqrt(params["sigma2"]) * rng.normal(size=(N, self.D))
        return {"y": y, "s": s}


class BSC(DiscreteLinearModel):
    """Binary sparse coding: Bernoulli(pi) latents, linear superposition."""

    name = "bsc"
    alphabet = (0.0, 1.0)

    def prior_probs(self, params):
        pi = params["pi"]
        return np.array([1.0 - pi, pi])

    def prior_update(self, counts, N, params):
        return {"pi": clip_pi(counts[1] / (N * self.H))}

    def neutral_prior(self):
        return {"pi": clip_pi(self.initial_pi())}


class TSC(DiscreteLinearModel):
    """Ternary sparse coding: ``s_h`` in {-1, 0, 1}, active with prob. pi, sign equiprobable."""

    name = "tsc"
    alphabet = (-1.0, 0.0, 1.0)

    def prior_probs(self, params):
        pi = params["pi"]
        return np.array([pi / 2, 1.0 - pi, pi / 2])

    def prior_update(self, counts, N, params):
        return {"pi": clip_pi((counts[0] + counts[2]) / (N * self.H))}

    def neutral_prior(self):
        return {"pi": clip_pi(self.initial_pi())}


class DSC(DiscreteLinearModel):
    """Discrete sparse coding over a user-given alphabet containing 0.

    ``params["p"]`` holds one probability per alphabet value (sorted order).
    With ``symmetric=True`` the probabilities of ``v`` and ``-v`` are tied.
    """

    name = "dsc"

    def __init__(self, D, H, Hprime, gamma, values, symmetric=False, max_states=None):
        self.alphabet = tuple(float(v) for v in values)
        super().__init__(D, H, Hprime, gamma, max_states)
        self.symmetric = bool(symmetric)
        if self.symmetric:
            if not np.array_equal(np.sort(-self.values), self.values):
                raise ConfigError("symmetric DSC needs an alphabet closed under negation")
            self._mirror = np.array([int(np.flatnonzero(self.values == -v)[0]) for v in self.values])

    def config(self):
        return {**super().config(), "values": self.values.tolist(), "symmetric": self.symmetric}

    def prior_probs(self, params):
        return np.asarray(params["p"], dtype=np.float64)

    def prior_update(self, counts, N, params):
        counts = np.asarray(counts, dtype=np.float64)
        if self.symmetric:
            counts = 0.5 * (counts + counts[self._mirror])
        p = np.maximum(counts / (N * self.H), P_MIN)
        return {"p": p / p.sum()}

    def neutral_prior(self):
        active = self.initial_pi()
        K = len(self.values)
        p = np.full(K, active / (K - 1))
        p[self.zero_index] = 1.0 - active
        return {"p": p}
