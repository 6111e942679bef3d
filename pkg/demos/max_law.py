"""Largest possible maximum for a target with negative mean.

Builds the potential of mu = {(-2, 1/2), (0, 1/2)}, prints the barrier the
extended rule follows, and compares the simulated law of the running
maximum at the stopping time with the analytic bound and with the naive
rule that first waits for the mean.

    python demos/max_law.py
"""

import numpy as np

from skorokhod import (
    barrier_table,
    build_potential,
    compile_naive,
    compile_tmax,
    from_atoms,
    ks_distance,
    max_law_bound,
    monte_carlo,
)
from skorokhod.verify import max_law_curve, minimality_diagnostic, stopped_mean_check

mu = from_atoms([(-2, 0.5), (0, 0.5)])
pf = build_potential(mu)
print(f"mean {pf.m:g}")
print("barrier table (max reached -> stop level):")
for t, b in barrier_table(pf):
    print(f"  M >= {t:g}: stop at {b:g}")

n = 200_000
best = monte_carlo(compile_tmax(mu), n, 1)
naive = monte_carlo(compile_naive(mu), n, 2)
print(f"\nKS to target: T_max {ks_distance(best, mu):.4f}, naive {ks_distance(naive, mu):.4f}")

xs = np.array([0.5, 1.0, 2.0, 3.0, 4.0, 8.0])
emp = max_law_curve(best, xs)
alt = max_law_curve(naive, xs)
print("\n     x   bound   T_max   naive")
for x, e, a in zip(xs, emp, alt):
    print(f"{x:6.2f}  {max_law_bound(pf, x):.4f}  {e:.4f}  {a:.4f}")

# the rule never drops below -2, so gamma * P(J_T <= -gamma) vanishes past 2
print("\ngamma * P(J_T <= -gamma):")
for g, gp, _ in minimality_diagnostic(best, mean=pf.m):
    print(f"  {g:5g}  {gp:.4f}")

print("\nE[B at T ^ H_x] (should be 0 within noise):")
for x, m, se in stopped_mean_check(best, [0.5, 1.0, 3.0], mean=pf.m):
    print(f"  x={x:g}: {m:+.4f} (se {se:.4f})")
