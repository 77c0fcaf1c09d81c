"""Moments of the sample subtree-mass distribution.

Three uniformly sampled leaves split a binary tree into three components at
their branch point; the law of the mass triple distinguishes the models.
Degrees 1 and 2 are parameter-free (1/3, 1/5, 1/15); from degree 3 the
moments depend on alpha through closed rational formulas, and the exact
recursion agrees with the independent-Beta representation at alpha = 0, the
Dirichlet(1/2, 1/2, 1/2) law at alpha = 1/2, and the Beta(2, 2) comb law at
alpha = 1.
"""

from fractions import Fraction

from alphaford._rng import stream
from alphaford.ford import build_comb_tree, sample_ford_tree
from alphaford.moments import (
    comb_moment,
    crt_dirichlet_moment,
    estimate_mass_moments,
    exact_tree_moment,
    kingman_closed_form,
    moment,
)

print("E[eta_1^3] across the parameter range (first alpha-dependent moment):")
for alpha in ("0", "1/4", "1/2", "3/4", "1"):
    print(f"  alpha={alpha:>3}: {moment(alpha, (3, 0, 0))}")

print("\nthree derivations of the same alpha = 0 value, k = (2, 2, 1):")
k = (2, 2, 1)
print("  recursion:          ", moment(0, k))
print("  closed form:        ", kingman_closed_form(k))
print("\nand the special laws at the endpoints, k = (3, 1, 0):")
k = (3, 1, 0)
print("  alpha=1/2 vs Dirichlet:", moment(Fraction(1, 2), k), crt_dirichlet_moment(k))
print("  alpha=1   vs comb law: ", moment(1, k), comb_moment(k))

print("\nMonte Carlo on a 2000-leaf draw at alpha = 0 (z against the limit law):")
tree = sample_ford_tree(0, 2000, stream(11))
ks = [(1, 0, 0), (2, 0, 0), (3, 0, 0)]
est = estimate_mass_moments(tree, ks, 50_000, stream(12))
for k in ks:
    mean, se = est[k]
    target = float(moment(0, k))
    print(f"  k={k}: {mean:.5f} +- {se:.5f}  (limit {target:.5f}, z={(mean-target)/se:+.2f})")

print("\nthe comb is deterministic, so its finite-size moment is exact:")
comb = build_comb_tree(2000)
print("  E[eta_1^2 | comb, N=2000] =", exact_tree_moment(comb, (2, 0, 0)))
print("  limit value              =", comb_moment((2, 0, 0)))
