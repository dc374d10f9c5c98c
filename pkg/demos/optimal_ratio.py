"""
Fastest ratchet: choosing the splitting ratio
=============================================

One protocol period lasts T1 + T2 = (pi/J) f(r) with
f(r) = 1/|J0(xi0 r)| + 1/|J0(xi0/r)| and r = Lambda2/Lambda1.
"""
import numpy as np

from qrouter.experiments import optimize_ratio, ratio_objective

r_star, f_star = optimize_ratio()
print(f"r* = {r_star:.5f}, period = {np.pi * f_star:.4f}/J")
for r in (0.45, 0.5, r_star, 0.7, 0.9):
    print(f"  f({r:.4f}) = {ratio_objective(r):.4f}")
