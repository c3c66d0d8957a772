"""
Linear bars with binary sparse coding
=====================================

Images on a 5x5 grid are sums of randomly switched-on horizontal and
vertical bars plus Gaussian noise.  A binary sparse coding model with ten
latents should learn one bar per dictionary column.
"""

import numpy as np

from truncem import BSC, EM, LinearAnnealing, seeded_rng
from truncem.bars import generate_bars, match_components

# 2000 images, each bar active with probability 0.2
y, s_true, W_true = generate_bars(size=5, n=2000, prob=0.2, amplitude=10, noise=2, seed=0)
print("data", y.shape, "true dictionary", W_true.shape)

# every data point considers its 7 best units and at most 4 simultaneously active ones
model = BSC(D=25, H=10, Hprime=7, gamma=4)

# a short warm phase (T from 3 down to 1 over the first 60%) helps to avoid
# dictionaries where one column holds two bars
anneal = LinearAnnealing(100, T=[(0.0, 3.0), (0.6, 1.0)])

em = EM(model=model, anneal=anneal, data=y, rng=seeded_rng(0))
em.run()
F = em.result.free_energy
print(f"free energy {F[0]:.1f} -> {F[-1]:.1f} in {em.result.iterations_run} iterations")

params = em.lparams
print(f"learned pi = {params['pi']:.3f} (true 0.2), sigma = {np.sqrt(params['sigma2']):.3f} (true 2)")

pairs = match_components(params["W"], W_true)
print(f"{len(pairs)} of 10 bars recovered")

# show one learned bar as a small image
t, h, c = pairs[0]
print(f"true bar {t} <-> column {h} (ncc {c:.3f})")
print(np.round(params["W"][:, h].reshape(5, 5), 1))

# most probable latent configurations for the first images
res = model.inference(params, y[:5])
for n in range(5):
    print("image", n, "active columns", np.flatnonzero(res["s"][n]), f"p={res['p'][n]:.3f}")
