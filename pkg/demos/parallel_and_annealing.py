"""
Sharded E-steps and annealing schedules
=======================================

The E-step runs on contiguous row shards and the partial statistics are
summed in shard order, so the worker count does not change the result.
"""

import numpy as np

from truncem import BSC, LinearAnnealing, ShardPlan, run, seeded_rng
from truncem.bars import generate_bars

y, _, _ = generate_bars(size=5, n=2000, seed=2)
model = BSC(25, 10, 7, 4)
p0 = model.standard_init(y, seeded_rng(2))

# temperature 2 -> 1 and dictionary noise 0.05 -> 0 over the first half
anneal = LinearAnnealing(30, T=[(0.0, 2.0), (0.5, 1.0)], w_noise=[(0.0, 0.05), (0.5, 0.0)])
for it in (0, 10, 15, 29):
    st = anneal.state_at(it)
    print(f"iteration {it}: T={st.T:.2f} noise={st.w_noise_std:.3f}")

traces = {}
for workers in (1, 2, 4):
    plan = ShardPlan.even(len(y), 4, workers)
    traces[workers] = run(model, p0, y, anneal, plan=plan, rng=seeded_rng(2).spawn(1)).free_energy

print("shard boundaries", ShardPlan.even(len(y), 4).boundaries)
print("identical traces:", traces[1] == traces[2] == traces[4])
print("last free energy", traces[1][-1])
