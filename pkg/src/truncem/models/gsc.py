"""Gaussian sparse coding: spike-and-slab latents ``s_h = b_h z_h`` with linear superposition.

``b_h ~ Bernoulli(pi)``, ``z_h ~ N(mu_h, psi_h)``, ``y ~ N(W s, sigma2 I)``.
Given a support ``A`` the slab values are integrated out in closed form, so
the truncated E-step runs over binary supports only.
"""

from __future__ import annotations

import numpy as np

from .base import LOG_2PI, SIGMA2_MIN, TruncatedModel, as_rng, clip_pi, residual_variance, solve_dictionary

PSI_MIN = 1e-10
NO_EVIDENCE = 1e-9


def _cholesky_inverse(prec):
    """Inverse and log-determinant of a stack of SPD matrices, jittered once on failure."""
    try:
        L = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        k = prec.shape[-1]
        jitter = 1e-10 * np.trace(prec, axis1=-2, axis2=-1) / k
        L = np.linalg.cholesky(prec + jitter[..., None, None] * np.eye(k))
    eye = np.broadcast_to(np.eye(prec.shape[-1]), prec.shape)
    Linv = np.linalg.solve(L, eye)
    cov = np.swapaxes(Linv, -1, -2) @ Linv
    logdet_prec = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return cov, logdet_prec


class GSC(TruncatedModel):
    name = "gsc"

    def __init__(self, D, H, Hprime, gamma, max_states=None):
        super().__init__(D, H, Hprime, gamma, max_states)

    # -- closed-form conditioning on a support -------------------------------
    def _support_terms(self, params, yW, yy, supp):
        """Batched moments for supports ``supp`` (M, k) with data terms ``yW`` (M, k), ``yy`` (M,).

        Returns ``(log_marginal, kappa, Lambda)``; supports are factorized once
        per distinct index set.
        """
        W, sigma2, mu, psi, pi = params["W"], params["sigma2"], params["mu"], params["psi"], params["pi"]
        M, k = supp.shape
        prior_b = k * np.log(pi) + (self.H - k) * np.log1p(-pi)
        if k == 0:
            logm = -0.5 * (self.D * (LOG_2PI + np.log(sigma2)) + yy / sigma2) + prior_b
            return logm, np.zeros((M, 0)), np.zeros((M, 0, 0))
        uniq, inv = np.unique(supp, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        WA = W[:, uniq]  # (D, U, k)
        G = np.einsum("dui,duj->uij", WA, WA)  # W_A^T W_A
        prec = G / sigma2 + np.einsum("ui,ij->uij", 1.0 / psi[uniq], np.eye(k))
        cov, logdet_prec = _cholesky_inverse(prec)
        mu_A, psi_A = mu[uniq], psi[uniq]
        mGm = np.einsum("ui,uij,uj->u", mu_A, G, mu_A)
        Gm = np.einsum("uij,uj->ui", G, mu_A)
        logdet_C = self.D * np.log(sigma2) + np.sum(np.log(psi_A), axis=1) + logdet_prec

        Lam = cov[inv]
        mA = mu_A[inv]
        kappa = np.einsum("mij,mj->mi", Lam, yW / sigma2 + mA / psi_A[inv])
        r2 = yy - 2.0 * np.sum(mA * yW, axis=1) + mGm[inv]
        Wr = (yW - Gm[inv]) / sigma2
        quad = r2 / sigma2 - np.einsum("mi,mij,mj->m", Wr, Lam, Wr)
        logm = -0.5 * (self.D * LOG_2PI + logdet_C[inv] + quad) + prior_b
        return logm, kappa, Lam

    def support_posterior(self, params, y, A):
        """``(log_marginal, kappa, Lambda)`` of one data point for active set ``A``."""
        y = np.asarray(y, dtype=np.float64)
        A = np.asarray(sorted(A), dtype=np.intp)
        yW = (y @ params["W"])[A][None, :]
        logm, kappa, Lam = self._support_terms(params, yW, np.array([y @ y]), A[None, :])
        return float(logm[0]), kappa[0], Lam[0]

    def log_joint(self, params, y, b):
        """Log marginal ``log p(y, b)`` with the slab integrated out."""
        return self.support_posterior(params, y, np.flatnonzero(np.asarray(b)))[0]

    # -- truncated E-step hooks ---------------------------------------------
    def selection_scores(self, params, y):
        W, sigma2, mu, psi = params["W"], params["sigma2"], params["mu"], params["psi"]
        y2 = np.atleast_2d(y)
        g = np.sum(W**2, axis=0)
        lam = 1.0 / (g / sigma2 + 1.0 / psi)
        yW = y2 @ W
        wr = (yW - g * mu) / sigma2
        # constant-in-h terms dropped: ||y||^2, D log sigma2, priors
        quad = (-2.0 * mu * yW + mu * mu * g) / sigma2 - lam * wr**2
        logdet = np.log(psi) - np.log(lam)
        score = -0.5 * (logdet + quad)
        return score if np.ndim(y) > 1 else score[0]

    def block_terms(self, params, y, states):
        B, K, H = states.shape
        counts = np.rint(states.sum(axis=-1)).astype(int)
        yW = y @ params["W"]
        yy = np.sum(y**2, axis=1)
        logm = np.empty((B, K))
        kappa = np.zeros((B, K, H))
        Lam = np.zeros((B, K, H, H))
        for k in np.unique(counts):
            bi, ki = np.nonzero(counts == k)
            if k == 0:
                logm[bi, ki], _, _ = self._support_terms(params, None, yy[bi], np.zeros((len(bi), 0), dtype=np.intp))
                continue
            supp = np.nonzero(states[bi, ki])[1].reshape(len(bi), k)
            lm, kap, lam = self._support_terms(params, np.take_along_axis(yW[bi], supp, axis=1), yy[bi], supp)
            logm[bi, ki] = lm
            kappa[bi[:, None], ki[:, None], supp] = kap
            Lam[bi[:, None, None], ki[:, None, None], supp[:, :, None], supp[:, None, :]] = lam
        return logm, (kappa, Lam)

    def log_joints(self, params, y, states):
        return self.block_terms(params, y, states)[0]

    def accumulate(self, params, y, states, q, aux=None, anneal=None):
        kappa, Lam = aux
        mean = np.einsum("bk,bkh->bh", q, kappa)
        second = np.einsum("bk,bkhg->hg", q, Lam) + np.einsum("bk,bkh,bkg->hg", q, kappa, kappa)
        return {
            "s": mean.sum(axis=0),
            "ss": second,
            "ys": y.T @ mean,
            "yy": np.sum(y**2),
            "b": np.einsum("bk,bkh->h", q, states),
        }

    def mstep(self, stats, params):
        N, D, H = stats.n, self.D, self.H
        W = solve_dictionary(stats["ys"], stats["ss"], params["W"])
        b = stats["b"]
        ok = b >= NO_EVIDENCE
        denom = np.maximum(b, NO_EVIDENCE)
        mu_new = stats["s"] / denom
        psi_new = np.maximum(np.diag(stats["ss"]) / denom - mu_new**2, PSI_MIN)
        return {
            "W": W,
            "sigma2": residual_variance(stats["yy"], stats["ys"], stats["ss"], W, N, D),
            "pi": clip_pi(np.sum(b) / (N * H)),
            "mu": np.where(ok, mu_new, params["mu"]),
            "psi": np.where(ok, psi_new, params["psi"]),
        }

    def standard_init(self, data, rng=None):
        data = self.dataset(data)
        W, var = self.init_dictionary(data.y, as_rng(rng))
        return {
            "W": W,
            "sigma2": max(var, SIGMA2_MIN),
            "pi": clip_pi(self.initial_pi()),
            "mu": np.zeros(self.H),
            "psi": np.ones(self.H),
        }

    def inference(self, params, data, anneal=None):
        res = super().inference(params, data, anneal)
        T = 1.0 if anneal is None else getattr(anneal, "T", 1.0)
        data = self.dataset(data)
        mean = np.zeros((data.N, self.H))
        z = np.zeros((data.N, self.H))
        for start, stop, states, q, _, (kappa, _) in self.posterior_blocks(params, data.y, T):
            mean[start:stop] = np.einsum("bk,bkh->bh", q, kappa)
            z[start:stop] = kappa[np.arange(stop - start), np.argmax(q, axis=1)]
        # s is the most probable support; z its slab posterior mean
        res["expectations"] = mean
        res["z"] = z
        return res

    def generate(self, params, N, rng=None):
        rng = as_rng(rng)
        b = rng.bernoulli(params["pi"], size=(N, self.H))
        z = params["mu"] + np.sqrt(params["psi"]) * rng.normal(size=(N, self.H))
        s = b * z
        y = s @ params["W"].T + np.sqrt(params["sigma2"]) * rng.normal(size=(N, self.D))
        return {"y": y, "s": s, "b": b}
