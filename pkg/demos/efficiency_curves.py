"""
How much does splitting the data cost?
======================================

Tabulates the limiting efficiency of optimally weighted distributed ridge
for equal shards, next to its infinite-worker floor.
"""

import numpy as np

from wonder import are_equal_split, infinite_worker_limit_h, optimal_weight_equal_split

# aspect ratio p/n of the full dataset and the signal-to-noise ratio
gammas = [0.05, 0.17, 0.5, 1.0, 2.0]
alpha2 = 1.0
ks = [1, 2, 5, 10, 50, 1000]

print("gamma  " + "  ".join(f"k={k:<5d}" for k in ks) + "  limit")
for g in gammas:
    psi = [are_equal_split(k, g, alpha2) for k in ks]
    print(f"{g:<6} " + "  ".join(f"{v:.4f} " for v in psi) + f"  {infinite_worker_limit_h(alpha2, g):.4f}")

# Efficiency never drops to zero: even with a thousand machines the loss is
# bounded.  The price is lowest when p/n is large, where every estimator
# struggles anyway.

# %%
# The optimal common weight is above 1/k, so the weights add up to more
# than one and undo part of the shrinkage each local fit applies.

for k in (2, 10, 100):
    w = optimal_weight_equal_split(k, 0.17, alpha2)
    print(f"k={k:<4d} weight={w:.4f}  sum={k * w:.3f}")

# and a quick look at how the sum grows with p/n
g = np.geomspace(0.01, 10, 7)
print(np.round([10 * optimal_weight_equal_split(10, x, alpha2) for x in g], 3))
