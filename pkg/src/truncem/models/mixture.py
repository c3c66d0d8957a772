"""Mixture models with a single categorical latent: isotropic GMM and Poisson mixture."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from ..core import mean_variance
from ..em import Model
from ..parallel import SuffStats
from ..truncation import posterior_weights
from .base import LOG_2PI, SIGMA2_MIN, as_rng

MIX_MIN = 1e-9
RATE_MIN = 1e-9
EMPTY = 1e-9


def _normalize_mix(mix):
    mix = np.maximum(mix, MIX_MIN)
    return mix / mix.sum()


class MixtureModel(Model):
    """Shared E/M plumbing; subclasses supply per-component log terms."""

    center_key = "means"

    def log_terms(self, params, y):
        """``log mix_c + log p(y | c)`` up to a data-only constant, shape (N, H)."""
        raise NotImplementedError

    def responsibilities(self, params, y, T=1.0):
        y2 = np.atleast_2d(np.asarray(y, dtype=np.float64))
        r, _ = posterior_weights(self.log_terms(params, y2), T)
        return r if np.ndim(y) > 1 else r[0]

    def estep(self, params, data, T=1.0, anneal=None):
        y = data.y
        r, logz = posterior_weights(self.log_terms(params, y), T)
        return SuffStats(
            {"r": r.sum(axis=0), "ry": y.T @ r, "ryy": np.sum(y**2, axis=1) @ r, "log_partition": np.sum(logz)},
            data.N,
        )

    def mixture_step(self, params, data, T=1.0, plan=None):
        from ..annealing import AnnealState

        return self.step(AnnealState(0, 1, T=T), params, data, plan)

    def inference(self, params, data, anneal=None):
        data = self.dataset(data)
        T = 1.0 if anneal is None else getattr(anneal, "T", 1.0)
        r, logz = posterior_weights(self.log_terms(params, data.y), T)
        idx = np.argmax(r, axis=1)
        s = np.zeros_like(r)
        s[np.arange(data.N), idx] = 1.0
        return {"s": s, "p": r[np.arange(data.N), idx], "expectations": r, "log_partition": logz}

    def exact_log_likelihood(self, params, data):
        data = self.dataset(data)
        return float(np.sum(posterior_weights(self.log_terms(params, data.y))[1]))

    def free_energy(self, params, data):
        return self.exact_log_likelihood(params, data)

    def clip_noisy(self, X):
        return X


class GMM(MixtureModel):
    """Gaussian mixture with one isotropic variance per component; ``means`` is D x H."""

    name = "gmm"
    noisy_param = "means"

    def log_terms(self, params, y):
        m, s2, mix = params["means"], params["sigma2"], params["mix"]
        sq = np.sum(y**2, axis=1)[:, None] - 2.0 * y @ m + np.sum(m**2, axis=0)[None, :]
        return np.log(mix) - 0.5 * self.D * (LOG_2PI + np.log(s2)) - sq / (2.0 * s2)

    def mstep(self, stats, params):
        r, ry, ryy = stats["r"], stats["ry"], stats["ryy"]
        ok = r >= EMPTY
        denom = np.maximum(r, EMPTY)
        means = np.where(ok, ry / denom, params["means"])
        resid = ryy - 2.0 * np.sum(means * ry, axis=0) + np.sum(means**2, axis=0) * r
        s2 = np.where(ok, np.maximum(resid / (self.D * denom), SIGMA2_MIN), params["sigma2"])
        return {"means": means, "sigma2": s2, "mix": _normalize_mix(r / stats.n)}

    def standard_init(self, data, rng=None):
        data = self.dataset(data)
        rng = as_rng(rng)
        var = mean_variance(data.y)
        means = data.y.mean(axis=0)[:, None] + np.sqrt(var) * rng.normal(size=(self.D, self.H))
        return {"means": means, "sigma2": np.full(self.H, var), "mix": np.full(self.H, 1.0 / self.H)}

    def generate(self, params, N, rng=None):
        rng = as_rng(rng)
        c = rng.categorical(params["mix"], size=N)
        y = params["means"][:, c].T + np.sqrt(params["sigma2"][c])[:, None] * rng.normal(size=(N, self.D))
        s = np.zeros((N, self.H))
        s[np.arange(N), c] = 1.0
        return {"y": y, "s": s}


class PMM(MixtureModel):
    """Poisson mixture over count vectors; ``rates`` is D x H.

    Log terms omit ``-sum_d log y_d!``; :func:`log_factorial_constant` gives it.
    """

    name = "pmm"
    noisy_param = "rates"
    data_kind = "count"

    def log_terms(self, params, y):
        lam, mix = params["rates"], params["mix"]
        return np.log(mix) + y @ np.log(lam) - np.sum(lam, axis=0)[None, :]

    def mstep(self, stats, params):
        r, ry = stats["r"], stats["ry"]
        ok = r >= EMPTY
        rates = np.where(ok, np.maximum(ry / np.maximum(r, EMPTY), RATE_MIN), params["rates"])
        return {"rates": rates, "mix": _normalize_mix(r / stats.n)}

    def standard_init(self, data, rng=None):
        data = self.dataset(data)
        rng = as_rng(rng)
        var = mean_variance(data.y)
        rates = data.y.mean(axis=0)[:, None] + np.sqrt(var) * rng.normal(size=(self.D, self.H))
        return {"rates": np.maximum(np.abs(rates), RATE_MIN), "mix": np.full(self.H, 1.0 / self.H)}

    def clip_noisy(self, X):
        return np.maximum(X, RATE_MIN)

    def generate(self, params, N, rng=None):
        rng = as_rng(rng)
        c = rng.categorical(params["mix"], size=N)
        y = rng.poisson(params["rates"][:, c].T).astype(np.float64)
        s = np.zeros((N, self.H))
        s[np.arange(N), c] = 1.0
        return {"y": y, "s": s}


def log_factorial_constant(y):
    """``sum_n sum_d log y_nd!``, the term PMM free energies leave out."""
    return float(np.sum(gammaln(np.asarray(y, dtype=np.float64) + 1.0)))
