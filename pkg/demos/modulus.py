"""Two-stage rule maximising the law of sup |B| for a positive-mean target.

For mu = {(0, 1/2), (2, 1/2)} and h(x) = |x| the rule runs to the exit of
(-2, 2); from 2 it stops, from -2 it waits for 0. The tail of sup |B| at
the stopping time is 1 up to level 2 and 1/y beyond.

    python demos/modulus.py
"""

import numpy as np

from skorokhod import compile_tmod, from_atoms, monte_carlo
from skorokhod.rules import rule_to_text
from skorokhod.verify import disjointness_violations

mu = from_atoms([(0, 0.5), (2, 0.5)])
rule = compile_tmod(mu, abs)
print(rule_to_text(rule))
info = rule.info
print(f"theta0 {info['theta0']:g}, exit levels ({-info['z_minus']:g}, {info['z_plus']:g}), p {info['p']:g}")

s = monte_carlo(rule, 200_000, 5)
sup = np.maximum(np.abs(s.m_T), np.abs(s.j_T))
print("\n    y   P(sup|B| >= y)   target")
for y in (1.0, 2.0, 2.5, 4.0, 8.0):
    print(f"{y:5g}   {np.mean(sup >= y):.4f}           {1.0 if y <= 2 else 1 / y:.4f}")
print(f"\npaths where both extremes pass 2.5: {disjointness_violations(s, np.abs, 2.5)}")
print(f"largest running maximum: {s.m_T.max():g}")
