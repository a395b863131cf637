"""
Correlated features want less regularization
============================================

Under an AR-1 covariance the best common lambda for distributed ridge sits
below the isotropic choice k*gamma/alpha2, while a single machine keeps the
isotropic value.
"""

from wonder.bench import lambda_sweep

rows, argmin = lambda_sweep(1500, 250, ks=[1, 2, 5], seeds=range(5), design="ar1", rho=0.9)

for k in (1, 2, 5):
    curve = [(r["multiplier"], r["risk"]) for r in rows if r["k"] == k]
    print(f"k={k}: " + "  ".join(f"{c:g}:{risk:.4f}" for c, risk in curve))
print("best multiplier per k:", argmin)

# Compare with the same sweep on white features.
_, iso = lambda_sweep(1500, 250, ks=[1, 2, 5], seeds=range(5))
print("isotropic:", iso)
