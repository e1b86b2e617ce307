"""Numerical checks of the limit theory.

Shows the standardized split-sample slope against N(0, 1), the shrinking
linearization residual and the OU variance formula.

Run: python demos/04_asymptotic_diagnostics.py
"""

import numpy as np

from qpredict import asymptotics as A
from qpredict.dgp import DgpConfig, PersistenceSpec, simulate_system

cfg = DgpConfig(n=2000, alpha=0.1, persistence=PersistenceSpec(c=-0.5, gamma_exp=0.0))
z = [A.standardized_slope(simulate_system(cfg, r), 0.5, 0.0) for r in range(300)]
print(f"standardized slope: mean {np.mean(z):+.3f}, var {np.var(z):.3f}, KS to N(0,1) {A.ks_distance(z):.3f}")

for m in (200, 2000):
    res = [A.linearization_residual(cfg, 0.5, [1.0, 1.0], m, r) for r in range(100)]
    print(f"linearization residual, m = {m:4d}: mean {np.mean(res):.4f}")

for c in (-10.0, -2.0, 0.0):
    ends = [A.simulate_jc(c, 1000, r).values[-1] for r in range(2000)]
    print(f"Var J_c(1), c = {c:5.1f}: simulated {np.var(ends):.4f}, exact {A.ou_variance(c):.4f}")
