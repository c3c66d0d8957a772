"""Machinery shared by the truncated-posterior models."""

from __future__ import annotations

import itertools

import numpy as np

from ..core import ConfigError, RngStream, StateExplosionError, log_sum_exp, mean_variance, seeded_rng
from ..em import Model
from ..truncation import TruncationConfig, build_states, posterior_weights, select_candidates_batch

LOG_2PI = np.log(2.0 * np.pi)
PI_MIN = 1e-6
SIGMA2_MIN = 1e-12
# elements per intermediate array in a block
_BLOCK_BUDGET = 4_000_000


def as_rng(rng):
    if rng is None:
        return seeded_rng(0)
    if isinstance(rng, RngStream):
        return rng
    return seeded_rng(rng)


def clip_pi(pi):
    return float(np.clip(pi, PI_MIN, 1.0 - PI_MIN))


def solve_dictionary(ys, ss, W_old):
    """``W = ys (ss + eps I)^-1`` with a trace-scaled ridge."""
    H = ss.shape[0]
    tr = float(np.trace(ss))
    if not tr > 0:
        return W_old.copy()
    A = ss + (1e-9 * tr / H) * np.eye(H)
    return np.linalg.solve(A, ys.T).T


def residual_variance(yy, ys, ss, W, N, D):
    r = yy - 2.0 * np.sum(W * ys) + np.sum((W.T @ W) * ss)
    return max(float(r) / (N * D), SIGMA2_MIN)


def unique_rows(X):
    """Distinct rows of a 2-D array and the inverse map.

    Binary rows with at most 52 columns are keyed by their exact bit code;
    anything else falls back to a lexicographic row sort.
    """
    if X.shape[1] <= 52 and np.all((X == 0) | (X == 1)):
        codes = X @ (2.0 ** np.arange(X.shape[1]))
        _, first, inv = np.unique(codes, return_index=True, return_inverse=True)
        return X[first], inv.reshape(-1)
    uniq, inv = np.unique(X, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


class TruncatedModel(Model):
    """A model whose E-step runs over per-point truncated state sets."""

    def __init__(self, D, H, Hprime, gamma, max_states=None):
        super().__init__(D, H)
        kwargs = {} if max_states is None else {"max_states": max_states}
        self.trunc = TruncationConfig(H, Hprime, gamma, **kwargs)
        K = self.trunc.n_states(self.n_values)
        if K > self.trunc.max_states:
            raise StateExplosionError(f"state explosion: {K} states per data point exceeds cap {self.trunc.max_states}")

    @property
    def Hprime(self):
        return self.trunc.Hprime

    @property
    def gamma(self):
        return self.trunc.gamma

    # latent alphabet without zero; binary models use (1,)
    nonzero_values = (1.0,)

    @property
    def n_values(self):
        return len(self.nonzero_values)

    @property
    def n_states(self):
        return self.trunc.n_states(self.n_values)

    def config(self):
        return {**super().config(), "Hprime": self.Hprime, "gamma": self.gamma}

    # -- hooks -------------------------------------------------------------
    def selection_scores(self, params, y):
        raise NotImplementedError

    def log_joints(self, params, y, states):
        """Log joints for a block: ``y`` (B, D), ``states`` (B, K, H) -> (B, K)."""
        raise NotImplementedError

    def block_terms(self, params, y, states):
        """Log joints plus model-specific per-state quantities reused by ``accumulate``."""
        return self.log_joints(params, y, states), None

    def accumulate(self, params, y, states, q, aux=None, anneal=None):
        """Sufficient statistics of one block as a dict of arrays."""
        raise NotImplementedError

    # -- shared ------------------------------------------------------------
    def block_size(self):
        K = self.n_states
        per_point = K * max(self.D, self.H) * max(self.H, 1)
        return max(1, min(4096, _BLOCK_BUDGET // max(per_point, 1)))

    def candidate_states(self, params, y):
        scores = np.atleast_2d(self.selection_scores(params, y))
        cand = select_candidates_batch(scores, self.Hprime)
        return build_states(cand, self.H, self.gamma, self.nonzero_values, self.trunc.max_states)

    def posterior_blocks(self, params, y, T=1.0):
        """Yield ``(start, stop, states, q, log_partition, aux)`` over consecutive blocks."""
        y = np.asarray(y)
        B = self.block_size()
        for start in range(0, y.shape[0], B):
            yb = y[start:start + B]
            states = self.candidate_states(params, yb)
            lj, aux = self.block_terms(params, yb, states)
            q, logz = posterior_weights(lj, T)
            yield start, start + yb.shape[0], states, q, logz, aux

    def estep(self, params, data, T=1.0, anneal=None):
        from ..parallel import SuffStats

        total = SuffStats()
        for start, stop, states, q, logz, aux in self.posterior_blocks(params, data.y, T):
            arrays = self.accumulate(params, data.y[start:stop], states, q, aux=aux, anneal=anneal)
            arrays["log_partition"] = np.sum(logz)
            total = total.combine(SuffStats(arrays, stop - start))
        return total

    def free_energy(self, params, data):
        data = self.dataset(data)
        return float(sum(np.sum(b[4]) for b in self.posterior_blocks(params, data.y)))

    def inference(self, params, data, anneal=None):
        """Most probable truncated state per point, its posterior mass, and ``<s>``."""
        data = self.dataset(data)
        T = 1.0 if anneal is None else getattr(anneal, "T", 1.0)
        N = data.N
        s = np.zeros((N, self.H))
        p = np.zeros(N)
        mean = np.zeros((N, self.H))
        logz_all = np.zeros(N)
        for start, stop, states, q, logz, _ in self.posterior_blocks(params, data.y, T):
            idx = np.argmax(q, axis=1)
            rows = np.arange(stop - start)
            s[start:stop] = states[rows, idx]
            p[start:stop] = q[rows, idx]
            mean[start:stop] = np.einsum("bk,bkh->bh", q, states)
            logz_all[start:stop] = logz
        return {"s": s, "p": p, "expectations": mean, "log_partition": logz_all}

    def init_dictionary(self, y, rng):
        ybar = y.mean(axis=0)
        var = mean_variance(y)
        noise = rng.normal(size=(self.D, self.H)) * np.sqrt(var / self.H)
        return ybar[:, None] + noise, var

    def initial_pi(self):
        return min(self.Hprime, self.H) / (2.0 * self.H)

    def all_states(self):
        """Every latent configuration over the model's alphabet (small H only)."""
        alphabet = (0.0,) + tuple(self.nonzero_values)
        n = len(alphabet) ** self.H
        if n > 2**20:
            raise ConfigError(f"full enumeration of {n} states is too large")
        return np.array(list(itertools.product(alphabet, repeat=self.H)), dtype=np.float64)

    def exact_log_likelihood(self, params, data):
        """Log-likelihood by enumerating the full latent space."""
        data = self.dataset(data)
        full = self.all_states()
        total = 0.0
        B = max(1, _BLOCK_BUDGET // (full.shape[0] * max(self.D, self.H) * self.H))
        for start in range(0, data.N, B):
            yb = data.y[start:start + B]
            states = np.broadcast_to(full, (yb.shape[0],) + full.shape)
            total += float(np.sum(log_sum_exp(self.log_joints(params, yb, states), axis=1)))
        return total
