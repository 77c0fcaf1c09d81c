"""Exact cladogram laws and deletion stability.

The one-leaf-removal recursion yields the exact law of the model on up to 8
leaves.  Two structural facts fall out immediately: at alpha = 1/2 the law
is uniform, and at alpha = 1 it concentrates on caterpillars.  Removing a
uniformly chosen leaf from the m-leaf law reproduces the (m-1)-leaf law
exactly, in rational arithmetic.
"""

from collections import Counter

from alphaford.cladogram import enumerate_cladograms
from alphaford.ford import deletion_stability_check, exact_distribution

m = 6
states = enumerate_cladograms(m)
print(f"law of the {m}-leaf model, aggregated by cherry count")
for alpha in ("0", "1/4", "1/2", "3/4", "1"):
    dist = exact_distribution(alpha, m)
    by_cherries = Counter()
    for t in states:
        by_cherries[len(t.cherries())] += dist.table[t.key]
    parts = ", ".join(f"{c} cherries: {p}" for c, p in sorted(by_cherries.items()))
    print(f"  alpha={alpha:>3}:  {parts}")

print("\nper-state probabilities at alpha = 1/2 are uniform:")
dist = exact_distribution("1/2", m)
print(f"  all {len(states)} states carry", next(iter(dist.table.values())))

print("\ndeletion stability (exact rational equality of the marginalized law):")
for alpha in ("0", "1/3", "1"):
    for mm in (5, 6, 7):
        ok, residual = deletion_stability_check(alpha, mm)
        print(f"  alpha={alpha:>3} m={mm}: equal={ok} residual={residual}")
