"""Linear stability along rays lam~ = gamma * mu~ of w' = (lam + i mu) w.

The predictor alone is never stable on the imaginary axis but becomes
unconditionally stable once damping dominates (gamma <= -1).  Two sweeps give
a finite plateau near mu~ = 2.075 as gamma -> 0, and the limit scheme is
stable for every gamma < 0.
"""
import math

from mdimex.analysis import amplification, stability_scan

gammas = [0.0, -1e-3, -1e-2, -1e-1, -0.5, -1.0, -5.0]
print(f"{'gamma':>8} {'predictor':>10} {'fullk2':>10} {'limit':>10}")
for g in gammas:
    row = [stability_scan(s, [g], mu_max_search=100.0, n_grid=2000)[0].mu_tilde_max
           for s in ("predictor", "fullk2", "limit")]
    print(f"{g:8.3f} " + " ".join(f"{m:10.4f}" if math.isfinite(m) else f"{'>100':>10}" for m in row))

print("\none-step amplification at mu~ = 1 on the imaginary axis:")
for s in ("predictor", "fullk1", "fullk2", "fullk5", "limit"):
    print(f"  {s:9s} {amplification(s, 0.0, 1.0):.12f}")
