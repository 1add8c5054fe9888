"""Order reduction on van der Pol and how more correction sweeps cure it.

With two sweeps the scheme is fourth order for mild stiffness, but at
eps = 1e-4 the observed order drops.  Iterating the sweeps to convergence
(k_max = 100) reaches the implicit fourth-order limit scheme and restores the
rate.  The reference solution is that limit scheme on a very fine grid, so
the first call takes a few seconds.
"""
from mdimex.analysis import convergence_study, fitted_order
from mdimex.core import SolverConfig
from mdimex.problems import family

dts = [0.1 * 2.0 ** -j for j in range(7)]
cfg = SolverConfig(dt=dts[0], t_end=0.5)

for eps in (1e-1, 1e-4):
    print(f"eps = {eps:g}")
    print("      dt   " + "".join(f"   k={k:<3d} err  slope" for k in (0, 2, 100)))
    cols = {k: convergence_study(family("vdp"), cfg, dts, [eps], k_max=k) for k in (0, 2, 100)}
    for j, dt in enumerate(dts):
        row = f"{dt:9.5f}  "
        for k in (0, 2, 100):
            r = cols[k][j]
            slope = f"{r.slope_vs_prev:5.2f}" if r.slope_vs_prev is not None else "    -"
            row += f"  {r.error:10.3e} {slope}"
        print(row)
    fits = ", ".join(f"k={k}: {fitted_order(cols[k][len(dts) // 2:]):.2f}" for k in cols)
    print(f"least-squares slope over the finer half: {fits}\n")
