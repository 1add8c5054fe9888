"""Quickstart: integrate the Kaps problem and compare with its exact solution.

The Kaps problem has the closed-form solution (exp(-2t), exp(-t)) for every
epsilon, so it is a clean way to see fourth-order accuracy survive stiffness.
"""
import numpy as np

from mdimex.core import SolverConfig
from mdimex.problems import KapsSpec, kaps, kaps_exact
from mdimex.solver import integrate

for eps in (1e-1, 1e-3, 1e-6):
    p = kaps(KapsSpec(eps))
    res = integrate(p, SolverConfig(dt=1e-2, t_end=1.0, k_max=2))
    err = np.linalg.norm(res.final - kaps_exact(1.0))
    print(f"eps={eps:7.0e}  w(1)={res.final}  error={err:.3e}  newton iterations={res.newton_iters_total}")

# halving the step cuts the error by about 2^4
print()
for dt in (4e-2, 2e-2, 1e-2, 5e-3):
    res = integrate(kaps(KapsSpec(1e-1)), SolverConfig(dt=dt, t_end=1.0, k_max=2))
    print(f"dt={dt:7.4f}  error={np.linalg.norm(res.final - kaps_exact(1.0)):.3e}")
