"""Maximal causes: binary latents combined by a (magnitude-)max rule.

MCA takes, per observed dimension, the largest weight among active causes
(weights kept non-negative); MMCA takes the weight of largest magnitude and
keeps its sign.  The M-step is a hard-winner fixed point: winners are fixed
under the current weights and each entry is refitted as a posterior-weighted
average of the data it explains.
"""

from __future__ import annotations

import numpy as np

from scipy.sparse import csr_matrix

from .base import LOG_2PI, SIGMA2_MIN, TruncatedModel, as_rng, clip_pi, unique_rows, _BLOCK_BUDGET

W_MIN = 1e-8
NO_EVIDENCE = 1e-9


def winner_index(W, s, mode="max"):
    """Index of the winning cause per dimension, shape ``s.shape[:-1] + (D,)``.

    Ties go to the smallest index.  Entries for all-zero states are
    meaningless and must be masked by the caller.
    """
    W = np.asarray(W, dtype=np.float64)
    s = np.asarray(s)
    key = W if mode == "max" else np.abs(W)
    masked = np.where(s[..., None, :] > 0, key, -np.inf)
    return np.argmax(masked, axis=-1)


def effective_weight(W, s, mode="max"):
    """Per-dimension weight under the max (or abs-max) combination of active causes."""
    W = np.asarray(W, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    idx = winner_index(W, s, mode)
    D = W.shape[0]
    Wbar = W[np.arange(D), idx]
    active = np.any(s > 0, axis=-1)[..., None]
    return np.where(active, Wbar, 0.0)


def winner_indicator(W, s, mode="max"):
    """D x H zero/one matrix marking the winner of each dimension."""
    s = np.asarray(s)
    if not np.any(s > 0):
        raise ValueError("no active cause: winner undefined for the zero state")
    W = np.asarray(W, dtype=np.float64)
    idx = winner_index(W, s, mode)
    A = np.zeros_like(W)
    A[np.arange(W.shape[0]), idx] = 1.0
    return A


def soft_winner(W, s, rho):
    """Softened MCA credit ``s_h W_dh^rho / sum_h' s_h' W_dh'^rho``; last axis is H."""
    logw = rho * np.log(np.maximum(W, W_MIN))
    logits = np.where(np.asarray(s)[..., None, :] > 0, logw, -np.inf)
    m = np.max(logits, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(logits - m)
    tot = e.sum(axis=-1, keepdims=True)
    return np.divide(e, tot, out=np.zeros_like(e), where=tot > 0)


class MaxCauses(TruncatedModel):
    mode = "max"

    def __init__(self, D, H, Hprime, gamma, rho=None, max_states=None):
        super().__init__(D, H, Hprime, gamma, max_states)
        self.rho = rho

    def config(self):
        return {**super().config(), "rho": self.rho}

    def clip_noisy(self, X):
        return np.maximum(X, W_MIN) if self.mode == "max" else X

    def log_prior(self, params, s):
        pi = params["pi"]
        s = np.asarray(s, dtype=np.float64)
        n = s.sum(axis=-1)
        return n * np.log(pi) + (s.shape[-1] - n) * np.log1p(-pi)

    def log_joint(self, params, y, s):
        y = np.asarray(y, dtype=np.float64)
        r = y - effective_weight(params["W"], s, self.mode)
        sigma2 = params["sigma2"]
        return float(self.log_prior(params, s) - 0.5 * self.D * (LOG_2PI + np.log(sigma2)) - r @ r / (2 * sigma2))

    def selection_scores(self, params, y):
        W, sigma2 = params["W"], params["sigma2"]
        score = (2.0 * (np.atleast_2d(y) @ W) - np.sum(W**2, axis=0)) / (2 * sigma2)
        return score if np.ndim(y) > 1 else score[0]

    def block_terms(self, params, y, states):
        W, sigma2 = params["W"], params["sigma2"]
        B, K, H = states.shape
        uniq, inv = unique_rows(states.reshape(-1, H))
        Wbar = effective_weight(W, uniq, self.mode)  # (U, D)
        rows = np.repeat(np.arange(B), K)
        if B * uniq.shape[0] <= _BLOCK_BUDGET:
            cross = (y @ Wbar.T)[rows, inv]
        else:
            cross = np.sum(y[rows] * Wbar[inv], axis=1)
        sq = (np.sum(y**2, axis=1)[rows] - 2.0 * cross + np.sum(Wbar**2, axis=1)[inv]).reshape(B, K)
        lj = self.log_prior(params, states) - 0.5 * self.D * (LOG_2PI + np.log(sigma2)) - sq / (2 * sigma2)
        return lj, (uniq, inv)

    def block_size(self):
        return max(1, min(4096, _BLOCK_BUDGET // (self.n_states * max(self.D, self.H))))

    def log_joints(self, params, y, states):
        return self.block_terms(params, y, states)[0]

    def credit(self, params, states, anneal=None):
        """Credit matrices (U, D, H) for binary states (U, H); rows sum to 1 unless the state is zero."""
        rho = self.rho
        if anneal is not None and "rho" in anneal.extras:
            rho = anneal.extras["rho"]
        active = np.any(states > 0, axis=-1)[:, None, None]
        if rho is not None and self.mode == "max":
            return soft_winner(params["W"], states, rho) * active
        idx = winner_index(params["W"], states, self.mode)
        return (idx[..., None] == np.arange(self.H)) * active

    def accumulate(self, params, y, states, q, aux=None, anneal=None):
        uniq, inv = aux
        B, K = q.shape
        Q = csr_matrix((q.ravel(), (np.repeat(np.arange(B), K), inv)), shape=(B, uniq.shape[0]))
        Qy = np.asarray(Q.T @ y)  # (U, D)
        Qs = np.asarray(Q.sum(axis=0)).ravel()  # (U,)
        A = self.credit(params, uniq, anneal)
        return {
            "num": np.einsum("udh,ud->dh", A, Qy),
            "den": np.einsum("udh,u->dh", A, Qs),
            "n_active": Qs @ uniq.sum(axis=1),
            "yy": np.sum(y**2),
        }

    def mstep_fixedpoint(self, stats, params):
        N, D, H = stats.n, self.D, self.H
        num, den = stats["num"], stats["den"]
        ok = den >= NO_EVIDENCE
        W = np.where(ok, num / np.maximum(den, NO_EVIDENCE), params["W"])
        W = self.clip_noisy(W)
        # residual under the new weights with the winners held fixed
        r = stats["yy"] - 2.0 * np.sum(W * num) + np.sum(W**2 * den)
        return {
            "W": W,
            "pi": clip_pi(stats["n_active"] / (N * H)),
            "sigma2": max(float(r) / (N * D), SIGMA2_MIN),
        }

    mstep = mstep_fixedpoint

    def standard_init(self, data, rng=None):
        data = self.dataset(data)
        rng = as_rng(rng)
        ybar = data.y.mean(axis=0)
        W, var = self.init_dictionary(data.y, rng)
        if self.mode == "max":
            W = np.maximum(ybar[:, None] + np.abs(W - ybar[:, None]), W_MIN)
        return {"W": W, "pi": clip_pi(self.initial_pi()), "sigma2": max(var, SIGMA2_MIN)}

    def generate(self, params, N, rng=None):
        rng = as_rng(rng)
        s = rng.bernoulli(params["pi"], size=(N, self.H))
        y = effective_weight(params["W"], s, self.mode) + np.sqrt(params["sigma2"]) * rng.normal(size=(N, self.D))
        return {"y": y, "s": s}


class MCA(MaxCauses):
    """Maximal causes analysis (non-negative weights, max combination)."""

    name = "mca"
    mode = "max"


class MMCA(MaxCauses):
    """Maximum magnitude causes analysis (signed weights, abs-max combination)."""

    name = "mmca"
    mode = "absmax"
