"""Static samplers and exact laws of the alpha-Ford family.

The alpha-Ford model grows a cladogram by repeatedly picking an edge with
weight 1 - alpha (external) or alpha (internal), inserting the next leaf in
its middle, and finally permuting the leaf labels.  alpha = 0 is the
Yule/coalescent tree, alpha = 1/2 the uniform cladogram, alpha = 1 the comb.

Exact probabilities on the space of m-cladograms are computed by the
one-leaf-removal recursion

    P_m(t) = (1/m) * sum_k P_{m-1}(t minus leaf k)
             * ((1-alpha) if k is a cherry else alpha) / (m - 1 - 3*alpha),

with uniform base case at m = 4 (insertion into the unique 3-cladogram sees
three equal-weight external edges, which also sidesteps the vanishing
denominator at alpha = 1, m = 4).  All probabilities are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from alphaford._rng import parse_alpha
from alphaford.cladogram import Cladogram, StructureError, enumerate_cladograms
from alphaford.tree import FiniteMeasureTree

__all__ = [
    "ExactDistribution",
    "sample_ford_cladogram",
    "sample_ford_tree",
    "sample_kingman_cladogram",
    "build_comb_tree",
    "exact_distribution",
    "deletion_stability_check",
]

MAX_EXACT_LEAVES = 8


@dataclass(frozen=True)
class ExactDistribution:
    """Exact law on the m-cladograms, keyed by canonical key."""

    alpha: Fraction
    m: int
    table: dict

    def prob(self, t: Cladogram) -> Fraction:
        return self.table.get(t.key, Fraction(0))

    def as_vector(self, states) -> list[Fraction]:
        return [self.table.get(t.key, Fraction(0)) for t in states]

    def total(self) -> Fraction:
        return sum(self.table.values(), Fraction(0))


def _grow_edges(alpha: Fraction, n_leaves: int, rng: np.random.Generator):
    """Run the weighted growth from the 2-leaf tree to ``n_leaves`` leaves.

    Returns the edge list; leaves are labeled 1..n in insertion order,
    internal vertices -1, -2, ...  When the total edge weight vanishes
    (alpha = 1 while only external edges exist) the next edge is drawn
    uniformly among the external ones.
    """
    if n_leaves < 2:
        raise StructureError("need at least 2 leaves")
    w_ext = float(1 - alpha)
    w_int = float(alpha)
    ext = [(1, 2)]
    internal: list[tuple[int, int]] = []
    for k in range(2, n_leaves):
        total = w_ext * len(ext) + w_int * len(internal)
        if total == 0.0:
            pick_ext = True
        else:
            pick_ext = rng.random() * total < w_ext * len(ext)
        lst = ext if pick_ext else internal
        i = int(rng.integers(len(lst)))
        lst[i], lst[-1] = lst[-1], lst[i]
        u, v = lst.pop()
        w = -(k - 1)
        for x in (u, v):
            (ext if x > 0 else internal).append((w, x))
        ext.append((w, k + 1))
    return ext + internal


def sample_ford_cladogram(alpha, m: int, rng: np.random.Generator) -> Cladogram:
    """One draw from the alpha-Ford model on m-cladograms.

    Growth by weighted edge insertion followed by a uniform relabeling of the
    leaves, which makes the law exchangeable.
    """
    alpha = parse_alpha(alpha)
    edges = _grow_edges(alpha, m, rng)
    perm = rng.permutation(m) + 1

    def relab(v: int) -> int:
        return int(perm[v - 1]) if v > 0 else v

    return Cladogram(m, [(relab(u), relab(v)) for u, v in edges])


def sample_ford_tree(alpha, n_leaves: int, rng: np.random.Generator) -> FiniteMeasureTree:
    """One draw of the alpha-Ford measure tree with ``n_leaves`` leaves.

    Same growth as :func:`sample_ford_cladogram`; the final label permutation
    is skipped because the measure tree carries no label information.
    """
    alpha = parse_alpha(alpha)
    return FiniteMeasureTree(Cladogram(n_leaves, _grow_edges(alpha, n_leaves, rng)))


def sample_kingman_cladogram(m: int, rng: np.random.Generator) -> Cladogram:
    """Cladogram read off a Kingman m-coalescent.

    Runs the jump chain on partitions (uniform pair merger at every step) and
    builds one internal vertex per merger; the final merger joins the two
    remaining block vertices by an edge.
    """
    if m < 2:
        raise StructureError("need at least 2 leaves")
    if m == 2:
        return Cladogram(2, [(1, 2)])
    blocks = list(range(1, m + 1))
    edges = []
    nxt = -1
    for k in range(m, 2, -1):
        i = int(rng.integers(k))
        j = int(rng.integers(k - 1))
        if j >= i:
            j += 1
        i, j = min(i, j), max(i, j)
        w = nxt
        nxt -= 1
        edges.append((w, blocks[i]))
        edges.append((w, blocks[j]))
        blocks[i] = w
        blocks.pop(j)
    edges.append((blocks[0], blocks[1]))
    return Cladogram(m, edges)


def build_comb_tree(n_leaves: int) -> FiniteMeasureTree:
    """The comb: a spine of n-2 internal vertices, one tooth leaf each, and
    one leaf at either end.  Labels run 1 (left end), 2..n-1 (teeth), n."""
    if n_leaves < 2:
        raise StructureError("need at least 2 leaves")
    if n_leaves == 2:
        return FiniteMeasureTree(Cladogram(2, [(1, 2)]))
    spine = [-i for i in range(1, n_leaves - 1)]
    edges = [(spine[0], 1), (spine[-1], n_leaves)]
    edges += [(s, t) for s, t in zip(spine, spine[1:])]
    edges += [(spine[i], i + 2) for i in range(len(spine))]
    return FiniteMeasureTree(Cladogram(n_leaves, edges))


@lru_cache(maxsize=None)
def _exact_distribution(alpha: Fraction, m: int) -> ExactDistribution:
    if m <= 4:
        states = enumerate_cladograms(m)
        p = Fraction(1, len(states))
        return ExactDistribution(alpha, m, {t.key: p for t in states})
    prev = _exact_distribution(alpha, m - 1)
    denom = m * (m - 1 - 3 * alpha)
    table = {}
    for t in enumerate_cladograms(m):
        cherries = t.cherries()
        acc = Fraction(0)
        for k in t.leaves:
            weight = (1 - alpha) if k in cherries else alpha
            if weight:
                acc += weight * prev.table[t.delete_leaf(k).key]
        table[t.key] = acc / denom
    dist = ExactDistribution(alpha, m, table)
    assert dist.total() == 1
    return dist


def exact_distribution(alpha, m: int) -> ExactDistribution:
    """Exact alpha-Ford law on m-cladograms, 2 <= m <= 8."""
    if not 2 <= m <= MAX_EXACT_LEAVES:
        raise StructureError(f"exact distributions support 2 <= m <= {MAX_EXACT_LEAVES}")
    return _exact_distribution(parse_alpha(alpha), m)


def deletion_stability_check(alpha, m: int) -> tuple[bool, Fraction]:
    """Marginalize the m-leaf law by deleting a uniform leaf and compare to
    the (m-1)-leaf law.  Returns (exact equality, max residual)."""
    if m < 3:
        raise StructureError("deletion stability needs m >= 3")
    dist = exact_distribution(alpha, m)
    marginal: dict = {}
    for t in enumerate_cladograms(m):
        p = dist.table[t.key] / m
        for k in t.leaves:
            key = t.delete_leaf(k).key
            marginal[key] = marginal.get(key, Fraction(0)) + p
    target = exact_distribution(alpha, m - 1)
    keys = set(marginal) | set(target.table)
    residual = max(
        abs(marginal.get(k, Fraction(0)) - target.table.get(k, Fraction(0))) for k in keys
    )
    return residual == 0, residual
