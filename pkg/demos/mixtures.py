"""
Gaussian and Poisson mixtures
=============================

The mixture models share the EM loop with the sparse coding models.  Each
data point belongs to exactly one component, so the posterior is exact.
"""

import numpy as np

from truncem import GMM, PMM, DataSet, LinearAnnealing, run, seeded_rng

means = np.array([[0.0, 10.0, 20.0], [0.0, 5.0, 0.0]])
gmm = GMM(D=2, H=3)
y = gmm.generate({"means": means, "sigma2": np.ones(3), "mix": np.array([0.5, 0.3, 0.2])}, 3000, seeded_rng(0))["y"]
res = run(gmm, gmm.standard_init(y, seeded_rng(0)), y, LinearAnnealing(50))
order = np.argsort(res.params["means"][0])
print("GMM means\n", np.round(res.params["means"][:, order], 2))
print("GMM weights", np.round(res.params["mix"][order], 3))

# counts with three rate levels
pmm = PMM(D=1, H=3)
counts = pmm.generate({"rates": np.array([[2.0, 20.0, 60.0]]), "mix": np.full(3, 1 / 3)}, 3000, seeded_rng(1))["y"]
data = DataSet(counts, kind="count")
res = run(pmm, pmm.standard_init(data, seeded_rng(1)), data, LinearAnnealing(50))
print("PMM rates", np.round(np.sort(res.params["rates"][0]), 2))

# the log-likelihood never decreases, up to rounding
F = np.array(res.free_energy)
print("smallest relative free energy step", (np.diff(F) / np.abs(F[1:])).min())
