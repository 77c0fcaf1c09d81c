"""Sampling the alpha-Ford family.

The parameter interpolates between three classical null models of
phylogenetic tree shape: alpha = 0 grows Yule/coalescent trees, alpha = 1/2
the uniform cladogram, and alpha = 1 the fully unbalanced comb.  Cherry
counts make the trend visible at a glance: combs always have exactly two
cherry pairs, while coalescent trees keep roughly two thirds of their leaves
in cherries.
"""

import numpy as np

from alphaford._rng import stream
from alphaford.cladogram import to_newick
from alphaford.ford import (
    build_comb_tree,
    sample_ford_cladogram,
    sample_ford_tree,
    sample_kingman_cladogram,
)

SEED = 7

print("one 8-leaf draw per parameter value")
for i, alpha in enumerate(("0", "1/4", "1/2", "3/4", "1")):
    t = sample_ford_cladogram(alpha, 8, stream(SEED, i))
    print(f"  alpha={alpha:>3}: {to_newick(t)}  cherries={len(t.cherries())}")

print("\ncherry fraction across 400 draws with 24 leaves")
for alpha in ("0", "1/2", "1"):
    rng = stream(SEED, 1)
    counts = [len(sample_ford_cladogram(alpha, 24, rng).cherries()) for _ in range(400)]
    print(f"  alpha={alpha:>3}: mean cherries {np.mean(counts):5.2f} (comb would give 4)")

print("\nthe coalescent construction gives the same law as alpha = 0:")
rng = stream(SEED, 2)
print(" ", to_newick(sample_kingman_cladogram(8, rng)))

comb = build_comb_tree(10)
print("\nthe deterministic 10-leaf comb:")
print(" ", comb.to_newick())
print("  teeth hang off a spine of", len(comb.topology.internal_vertices), "internal vertices")
