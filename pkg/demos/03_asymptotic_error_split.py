"""Split the global error into its epsilon-independent and first-order parts.

Three runs at eps, alpha*eps and alpha^2*eps give delta0 (the error of the
limit eps -> 0) and delta1 (the sensitivity to eps).  Two independent delta0
estimates agree when the second-order term is negligible.
"""
from mdimex.analysis import DEFAULT_ALPHA, DEFAULT_EPSILON_BASE, asymptotic_decompose, omega_weights
from mdimex.core import SolverConfig
from mdimex.problems import family

print("omega weights for alpha = 5/6:", omega_weights(DEFAULT_ALPHA))
dts = [0.1 * 2.0 ** -j for j in range(5)]
out = asymptotic_decompose(family("vdp"), SolverConfig(dt=dts[0], t_end=0.5, k_max=100), dts,
                           DEFAULT_ALPHA, DEFAULT_EPSILON_BASE)
print(f"{'dt':>9} {'delta0':>12} {'delta1':>12} {'delta0 (alt)':>13} {'rel diff':>9}")
for d in out:
    print(f"{d.dt:9.5f} {d.delta0:12.4e} {d.delta1:12.4e} {d.delta0_alt:13.4e} "
          f"{abs(d.delta0 - d.delta0_alt) / d.delta0:9.1e}")
