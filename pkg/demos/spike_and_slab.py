"""
Spike-and-slab sparse coding
============================

Each latent is either exactly zero or drawn from a Gaussian slab.  The
posterior over slab values given which units are active is Gaussian, so
only the binary supports have to be enumerated.
"""

import numpy as np

from truncem import GSC, LinearAnnealing, run, seeded_rng

rng = np.random.default_rng(3)
D, H = 12, 6
truth = {
    "W": rng.normal(size=(D, H)) * 2,
    "sigma2": 0.25,
    "pi": 0.2,
    "mu": np.linspace(-2, 2, H),
    "psi": np.full(H, 0.5),
}
model = GSC(D, H, Hprime=5, gamma=3)
sample = model.generate(truth, 3000, seeded_rng(3))
y = sample["y"]

# posterior of one data point under its true support
A = np.flatnonzero(sample["b"][0])
logm, mean, cov = model.support_posterior(truth, y[0], A)
print("support", A, "true slab values", np.round(sample["s"][0, A], 2))
print("posterior mean", np.round(mean, 2))

res = run(model, model.standard_init(y, seeded_rng(4)), y, LinearAnnealing(80))
p = res.params
print(f"pi {p['pi']:.3f} (true 0.2), sigma2 {p['sigma2']:.3f} (true 0.25)")

# columns come back in arbitrary order and with a sign and scale shared with mu
corr = np.abs(np.corrcoef(truth["W"].T, p["W"].T)[:H, H:])
print("best column correlations", np.round(corr.max(axis=1), 3))

inf = model.inference(p, y[:3])
print("MAP supports\n", inf["s"])
print("slab means of those supports\n", np.round(inf["z"], 2))
