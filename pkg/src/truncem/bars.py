"""Bars test: superpositions of horizontal and vertical bars on an R x R grid."""

from __future__ import annotations

import numpy as np

from .core import ConfigError, seeded_rng


def bars_dictionary(size, amplitude=10.0):
    """D x H dictionary, D = size**2, H = 2*size: horizontal bars first, then vertical."""
    R = int(size)
    W = np.zeros((R * R, 2 * R))
    for i in range(R):
        img = np.zeros((R, R))
        img[i, :] = amplitude
        W[:, i] = img.ravel()
        img = np.zeros((R, R))
        img[:, i] = amplitude
        W[:, R + i] = img.ravel()
    return W


def generate_bars(size=5, n=2000, prob=None, amplitude=10.0, noise=2.0, mode="linear", seed=0):
    """Return ``(y, s, W)``: data (n x D), bar activations (n x H) and the true dictionary."""
    if mode not in ("linear", "max"):
        raise ConfigError(f"unknown superposition mode {mode!r}")
    if size < 1 or n < 1:
        raise ConfigError("size and n must be positive")
    W = bars_dictionary(size, amplitude)
    H = W.shape[1]
    prob = 2.0 / H if prob is None else float(prob)
    if not 0.0 <= prob <= 1.0 or noise < 0:
        raise ConfigError("prob must lie in [0, 1] and noise must be >= 0")
    rng = seeded_rng(seed)
    s = rng.bernoulli(prob, size=(n, H))
    if mode == "linear":
        clean = s @ W.T
    else:
        clean = np.max(s[:, None, :] * W[None, :, :], axis=2)
    y = clean + noise * rng.normal(size=clean.shape)
    return y, s, W


def ncc(a, b):
    """Normalized cross-correlation (Pearson) of two vectors."""
    a = np.asarray(a, dtype=np.float64) - np.mean(a)
    b = np.asarray(b, dtype=np.float64) - np.mean(b)
    den = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / den) if den > 0 else 0.0


def match_components(W_learned, W_true, threshold=0.85):
    """Greedy one-to-one matching by NCC.

    Returns the list of ``(true_index, learned_index, ncc)`` pairs with NCC
    above ``threshold``.
    """
    Hl, Ht = W_learned.shape[1], W_true.shape[1]
    C = np.array([[ncc(W_true[:, t], W_learned[:, h]) for h in range(Hl)] for t in range(Ht)])
    pairs = []
    C = C.copy()
    while True:
        t, h = np.unravel_index(np.argmax(C), C.shape)
        if C[t, h] <= threshold or not np.isfinite(C[t, h]):
            break
        pairs.append((int(t), int(h), float(C[t, h])))
        C[t, :] = -np.inf
        C[:, h] = -np.inf
    return pairs
