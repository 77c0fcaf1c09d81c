"""Finite binary algebraic measure trees: branch points, component masses,
the branch point distribution, and the mass metric.

A :class:`FiniteMeasureTree` is a binary tree with N leaves carrying uniform
mass 1/N each (an element of the N-leaf slice of binary algebraic measure
trees).  Leaf labels of the underlying topology are kept for addressing but
carry no probabilistic meaning.

Single-point queries return exact rationals.  Batched queries (used by the
Monte Carlo estimators) run on flat numpy arrays with an Euler-tour sparse
table for O(1) LCA lookups, mirroring the usual array-backed phylogenetics
layout.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from alphaford.cladogram import Cladogram, StructureError, from_newick, to_newick

__all__ = ["FiniteMeasureTree"]


class _Index:
    """Flat-array view of a tree rooted at leaf 1: parents, depths, subtree
    leaf counts, Euler-tour LCA, and binary-lifting ancestor jumps."""

    def __init__(self, clad: Cladogram):
        n = clad.m
        internals = sorted(clad.internal_vertices, reverse=True)
        ids = list(range(1, n + 1)) + internals
        self.ids = ids
        self.pos = {v: i for i, v in enumerate(ids)}
        self.n_leaves = n
        V = len(ids)
        nbr = [[self.pos[w] for w in clad.adjacency[v]] for v in ids]

        parent = np.full(V, -1, np.int64)
        depth = np.zeros(V, np.int64)
        order = []
        stack = [0]
        seen = bytearray(V)
        seen[0] = 1
        while stack:
            v = stack.pop()
            order.append(v)
            for w in nbr[v]:
                if not seen[w]:
                    seen[w] = 1
                    parent[w] = v
                    depth[w] = depth[v] + 1
                    stack.append(w)
        self.parent = parent
        self.depth = depth

        leafcnt = np.zeros(V, np.int64)
        leafcnt[:n] = 1
        for v in reversed(order):
            if v != 0:
                leafcnt[parent[v]] += leafcnt[v]
        self.leafcnt = leafcnt

        # Euler tour (iterative DFS re-visiting a vertex after each child)
        tour = np.empty(2 * V - 1, np.int64)
        first = np.full(V, -1, np.int64)
        tin = np.empty(V, np.int64)
        tout = np.empty(V, np.int64)
        children = [[] for _ in range(V)]
        for v in order[1:]:
            children[parent[v]].append(v)
        ptr = 0
        clock = 0
        dfs: list[tuple[int, int]] = [(0, 0)]
        while dfs:
            v, ci = dfs.pop()
            if ci == 0:
                first[v] = ptr
                tin[v] = clock
                clock += 1
            tour[ptr] = v
            ptr += 1
            if ci < len(children[v]):
                dfs.append((v, ci + 1))
                dfs.append((children[v][ci], 0))
            else:
                tout[v] = clock
        self.tour = tour
        self.first = first
        self.tin = tin
        self.tout = tout

        tour_depth = depth[tour]
        L = len(tour)
        logs = np.zeros(L + 1, np.int64)
        for i in range(2, L + 1):
            logs[i] = logs[i // 2] + 1
        self.logs = logs
        K = logs[L] + 1
        sparse = np.empty((K, L), np.int64)
        sparse[0] = np.arange(L)
        for j in range(1, K):
            span = 1 << (j - 1)
            left = sparse[j - 1, : L - 2 * span + 1]
            right = sparse[j - 1, span : L - span + 1]
            sparse[j, : L - 2 * span + 1] = np.where(
                tour_depth[left] <= tour_depth[right], left, right
            )
        self.sparse = sparse
        self.tour_depth = tour_depth

        LOG = max(1, int(depth.max()).bit_length())
        up = np.empty((LOG, V), np.int64)
        up[0] = np.where(parent >= 0, parent, 0)
        for j in range(1, LOG):
            up[j] = up[j - 1][up[j - 1]]
        self.up = up
        self.LOG = LOG

    # -- vectorized primitives (positions in, positions out) -------------------

    def lca(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        fu, fv = self.first[u], self.first[v]
        lo = np.minimum(fu, fv)
        hi = np.maximum(fu, fv)
        j = self.logs[hi - lo + 1]
        a = self.sparse[j, lo]
        b = self.sparse[j, hi - (1 << j) + 1]
        best = np.where(self.tour_depth[a] <= self.tour_depth[b], a, b)
        return self.tour[best]

    def median(self, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        a = self.lca(x, y)
        b = self.lca(y, z)
        c = self.lca(x, z)
        # two of the three pairwise LCAs coincide; the median is the deepest
        out = np.where(self.depth[b] > self.depth[a], b, a)
        return np.where(self.depth[c] > self.depth[out], c, out)

    def kth_ancestor(self, u: np.ndarray, k: np.ndarray) -> np.ndarray:
        u = np.array(u, copy=True)
        k = np.maximum(k, 0)
        for bit in range(self.LOG):
            mask = (k >> bit) & 1 == 1
            if mask.any():
                u[mask] = self.up[bit, u[mask]]
        return u

    def is_ancestor(self, a: np.ndarray, u: np.ndarray) -> np.ndarray:
        return (self.tin[a] <= self.tin[u]) & (self.tout[u] <= self.tout[a])

    def component_leaf_count(self, v: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Leaves in the component of (tree minus v) containing u, u != v."""
        below = self.is_ancestor(v, u)
        child = self.kth_ancestor(u, self.depth[u] - self.depth[v] - 1)
        return np.where(below, self.leafcnt[child], self.n_leaves - self.leafcnt[v])


class FiniteMeasureTree:
    """Binary tree with N labeled leaves and uniform mass 1/N per leaf."""

    def __init__(self, topology: Cladogram):
        self.topology = topology
        self._idx: _Index | None = None
        self._nu: dict[int, Fraction] | None = None

    @classmethod
    def from_newick(cls, s: str) -> "FiniteMeasureTree":
        return cls(from_newick(s))

    def to_newick(self) -> str:
        return to_newick(self.topology)

    @property
    def n(self) -> int:
        return self.topology.m

    @property
    def leaf_ids(self) -> range:
        return self.topology.leaves

    @property
    def leaf_mass(self) -> Fraction:
        return Fraction(1, self.n)

    @property
    def index(self) -> _Index:
        if self._idx is None:
            self._idx = _Index(self.topology)
        return self._idx

    def __repr__(self) -> str:
        return f"FiniteMeasureTree(n={self.n})"

    # -- exact single-point queries ---------------------------------------------

    def branch_point(self, x: int, y: int, z: int) -> int:
        """The median vertex c(x, y, z), lying on all three pairwise paths."""
        idx = self.index
        p = idx.median(
            np.array([idx.pos[x]]), np.array([idx.pos[y]]), np.array([idx.pos[z]])
        )[0]
        return idx.ids[p]

    def component_leaf_counts(self, u: Sequence[int]) -> tuple[int, int, int]:
        """Leaf counts of the three components hanging off c(u1, u2, u3)."""
        x, y, z = u
        if len({x, y, z}) != 3:
            raise StructureError("component masses need three distinct leaves")
        idx = self.index
        pts = np.array([idx.pos[x], idx.pos[y], idx.pos[z]])
        v = idx.median(pts[:1], pts[1:2], pts[2:3])
        counts = idx.component_leaf_count(np.repeat(v, 3), pts)
        return tuple(int(c) for c in counts)

    def component_masses(self, u: Sequence[int]) -> tuple[Fraction, Fraction, Fraction]:
        """Mass vector (eta_1, eta_2, eta_3) of the components at c(u); sums to 1."""
        n = self.n
        return tuple(Fraction(c, n) for c in self.component_leaf_counts(u))

    def internal_component_counts(self) -> dict[int, tuple[int, int, int]]:
        """For each internal vertex, the leaf counts of its three components."""
        idx = self.index
        n = self.n
        out = {}
        children: dict[int, list[int]] = {}
        for p in range(len(idx.ids)):
            par = idx.parent[p]
            if par >= 0:
                children.setdefault(int(par), []).append(p)
        for p in range(n, len(idx.ids)):
            c1, c2 = children[p]
            out[idx.ids[p]] = (
                int(idx.leafcnt[c1]),
                int(idx.leafcnt[c2]),
                n - int(idx.leafcnt[p]),
            )
        return out

    def branch_point_distribution(self) -> dict[int, Fraction]:
        """nu(v) = P(c(U1, U2, U3) = v) for U_i iid uniform leaves.

        For an internal vertex with component masses (a, b, c) this is 6abc;
        a leaf of mass p contributes 3p^2 - 2p^3 (the triples with at least
        two coordinates equal to it).  Values sum to exactly 1.
        """
        if self._nu is None:
            n = self.n
            cube = n**3
            nu = {leaf: Fraction(3 * n - 2, cube) for leaf in self.leaf_ids}
            for v, (a, b, c) in self.internal_component_counts().items():
                nu[v] = Fraction(6 * a * b * c, cube)
            self._nu = nu
        return self._nu

    def interval(self, x: int, y: int) -> tuple[int, ...]:
        """Vertices z with c(x, y, z) = z: the path from x to y inclusive."""
        idx = self.index
        px, py = idx.pos[x], idx.pos[y]
        anc = int(idx.lca(np.array([px]), np.array([py]))[0])
        path = []
        p = px
        while p != anc:
            path.append(p)
            p = int(idx.parent[p])
        path.append(anc)
        tail = []
        p = py
        while p != anc:
            tail.append(p)
            p = int(idx.parent[p])
        path.extend(reversed(tail))
        return tuple(idx.ids[p] for p in path)

    def r_mu(self, x: int, y: int) -> Fraction:
        """Mass metric: nu of the interval [x, y] minus half the endpoint atoms."""
        nu = self.branch_point_distribution()
        total = sum((nu[v] for v in self.interval(x, y)), Fraction(0))
        return total - Fraction(1, 2) * nu[x] - Fraction(1, 2) * nu[y]

    # -- batched queries for Monte Carlo --------------------------------------

    def quartet_partners(self, a, b, c, d) -> np.ndarray:
        """For arrays of distinct leaf ids: which of b, c, d pairs with a.

        Returns codes 1, 2, 3 for partner b, c, d.  The pairing {a,x}|{y,z}
        is detected through equality of medians: a pairs with b iff
        c(a,b,c) == c(a,b,d), else with c iff c(a,b,c) == c(a,c,d).
        """
        idx = self.index
        pa, pb, pc, pd = (np.asarray(v) - 1 for v in (a, b, c, d))
        m_abc = idx.median(pa, pb, pc)
        m_abd = idx.median(pa, pb, pd)
        m_acd = idx.median(pa, pc, pd)
        return np.where(m_abc == m_abd, 1, np.where(m_abc == m_acd, 2, 3))

    def triple_component_counts(self, a, b, c) -> np.ndarray:
        """Component leaf counts at the median, for arrays of distinct leaf
        ids; shape (len, 3), row order matching the sample order."""
        idx = self.index
        pts = [np.asarray(v) - 1 for v in (a, b, c)]
        v = idx.median(*pts)
        return np.stack([idx.component_leaf_count(v, p) for p in pts], axis=1)

    def sample_distinct_leaves(self, count: int, k: int, rng: np.random.Generator) -> np.ndarray:
        """(count, k) array of leaf ids, each row without repetition."""
        n = self.n
        if k > n:
            raise StructureError(f"cannot draw {k} distinct leaves from {n}")
        out = rng.integers(1, n + 1, size=(count, k))
        while True:
            bad = np.zeros(count, dtype=bool)
            for i in range(k):
                for j in range(i + 1, k):
                    bad |= out[:, i] == out[:, j]
            if not bad.any():
                return out
            out[bad] = rng.integers(1, n + 1, size=(int(bad.sum()), k))
