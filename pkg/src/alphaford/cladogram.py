"""Leaf-labeled unrooted binary trees (cladograms) and their edit moves.

An m-cladogram has leaves labeled 1..m (vertex ids 1..m), unlabeled internal
vertices of degree exactly 3 (negative vertex ids, values arbitrary), no edge
lengths.  All operations are pure: they return new :class:`Cladogram` objects
and never mutate their inputs.

Identity of labeled cladograms goes through :meth:`Cladogram.key`, the sorted
tuple of internal-edge bipartitions encoded by the side that excludes label 1.
Two cladograms are isomorphic as labeled trees iff their keys are equal.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

__all__ = [
    "Cladogram",
    "LabelledCladogram",
    "StructureError",
    "double_factorial",
    "num_cladograms",
    "enumerate_cladograms",
    "shape",
    "labelled_shape",
    "to_newick",
    "from_newick",
    "MAX_ENUMERATION_LEAVES",
]

MAX_ENUMERATION_LEAVES = 8

Edge = tuple[int, int]


class StructureError(ValueError):
    """Raised when an operation would violate the cladogram invariants."""


def _edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class Cladogram:
    """Immutable leaf-labeled unrooted binary tree.

    Parameters
    ----------
    m : int
        Number of leaves (>= 2).  Leaves carry vertex ids 1..m.
    edges : iterable of (int, int)
        Undirected edges.  Internal vertices must use negative ids.
    """

    __slots__ = ("m", "edges", "_adj", "_key", "_hash")

    def __init__(self, m: int, edges: Iterable[Edge], _validate: bool = True):
        self.m = int(m)
        self.edges: tuple[Edge, ...] = tuple(sorted(_edge(u, v) for u, v in edges))
        self._adj: dict[int, tuple[int, ...]] | None = None
        self._key = None
        self._hash = None
        if _validate:
            self._validate()

    # -- structure ----------------------------------------------------------

    def _validate(self) -> None:
        m = self.m
        if m < 2:
            raise StructureError(f"need at least 2 leaves, got {m}")
        if len(self.edges) != 2 * m - 3:
            raise StructureError(f"{m}-cladogram needs {2 * m - 3} edges, got {len(self.edges)}")
        adj = self.adjacency
        leaves = [v for v in adj if v > 0]
        internal = [v for v in adj if v < 0]
        if 0 in adj:
            raise StructureError("vertex id 0 is reserved")
        if sorted(leaves) != list(range(1, m + 1)):
            raise StructureError(f"leaf labels must be exactly 1..{m}")
        if len(internal) != (m - 2 if m >= 3 else 0):
            raise StructureError(f"expected {max(m - 2, 0)} internal vertices, got {len(internal)}")
        for v in leaves:
            if len(adj[v]) != 1:
                raise StructureError(f"leaf {v} has degree {len(adj[v])}")
        for v in internal:
            if len(adj[v]) != 3:
                raise StructureError(f"internal vertex {v} has degree {len(adj[v])}")
        # edge count + degree constraints make connectivity equivalent to acyclicity;
        # check it by BFS anyway so corrupted inputs fail loudly
        seen = {1}
        stack = [1]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(adj):
            raise StructureError("tree is not connected")

    @property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        if self._adj is None:
            adj: dict[int, list[int]] = {}
            for u, v in self.edges:
                adj.setdefault(u, []).append(v)
                adj.setdefault(v, []).append(u)
            self._adj = {v: tuple(sorted(nb)) for v, nb in adj.items()}
        return self._adj

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def is_leaf(self, v: int) -> bool:
        return v > 0

    @property
    def leaves(self) -> range:
        return range(1, self.m + 1)

    @property
    def internal_vertices(self) -> tuple[int, ...]:
        return tuple(v for v in self.adjacency if v < 0)

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(self.adjacency)

    # -- canonical identity --------------------------------------------------

    def _split_side(self, u: int, avoid: int) -> list[int]:
        """Leaf labels reachable from ``u`` without crossing edge (u, avoid)."""
        labels = []
        seen = {avoid, u}
        stack = [u]
        while stack:
            x = stack.pop()
            if x > 0:
                labels.append(x)
            for w in self.adjacency[x]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return labels

    @property
    def key(self) -> tuple:
        """Canonical key: ``(m, sorted internal-edge splits)``.

        Each split is the sorted tuple of leaf labels on the bipartition side
        that does not contain label 1; external edges are excluded.  Equal
        keys characterize labeled isomorphism, and the encoding is stable
        across processes (plain integer tuples).
        """
        if self._key is None:
            splits = []
            for u, v in self.edges:
                if u < 0 and v < 0:
                    side = self._split_side(u, v)
                    if 1 in side:
                        side = self._split_side(v, u)
                    splits.append(tuple(sorted(side)))
            self._key = (self.m, tuple(sorted(splits)))
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cladogram):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def __repr__(self) -> str:
        return f"Cladogram(m={self.m}, {to_newick(self)!r})"

    # -- edit moves -----------------------------------------------------------

    def insert_leaf(self, edge: Edge, new_label: int | None = None) -> "Cladogram":
        """Insert a leaf in the middle of ``edge``.

        Labels >= ``new_label`` are shifted up by one, then a new internal
        vertex subdivides the edge and connects to the new leaf.  With the
        default ``new_label = m + 1`` no shifting occurs.
        """
        m = self.m
        if new_label is None:
            new_label = m + 1
        if not 1 <= new_label <= m + 1:
            raise StructureError(f"new label {new_label} out of range 1..{m + 1}")
        e = _edge(*edge)
        if e not in self.edges:
            raise StructureError(f"{e} is not an edge of this cladogram")

        def relab(v: int) -> int:
            return v + 1 if 0 < new_label <= v else v

        w = min(self.internal_vertices, default=0) - 1
        new_edges = [(relab(u), relab(v)) for u, v in self.edges if (u, v) != e]
        a, b = relab(e[0]), relab(e[1])
        new_edges += [(w, a), (w, b), (w, new_label)]
        return Cladogram(m + 1, new_edges)

    def delete_leaf(self, label: int) -> "Cladogram":
        """Remove leaf ``label``, suppress the degree-2 vertex left behind,
        and shift labels > ``label`` down by one."""
        m = self.m
        if m <= 2:
            raise StructureError("cannot delete a leaf from a 2-cladogram")
        if not 1 <= label <= m:
            raise StructureError(f"no leaf labeled {label}")
        v = self.adjacency[label][0]
        a, b = (x for x in self.adjacency[v] if x != label)

        def relab(x: int) -> int:
            return x - 1 if x > label else x

        dropped = {_edge(label, v), _edge(v, a), _edge(v, b)}
        new_edges = [(relab(u), relab(w)) for u, w in self.edges if _edge(u, w) not in dropped]
        new_edges.append((relab(a), relab(b)))
        return Cladogram(m - 1, new_edges)

    # -- combinatorial queries -------------------------------------------------

    def cherries(self) -> frozenset[int]:
        """Leaves whose internal neighbor has exactly two leaf neighbors.

        For m <= 3 every leaf counts as a cherry; this is the degenerate base
        case used by the backward-chain rates.
        """
        if self.m <= 3:
            return frozenset(self.leaves)
        out = []
        for leaf in self.leaves:
            v = self.adjacency[leaf][0]
            if sum(1 for x in self.adjacency[v] if x > 0) == 2:
                out.append(leaf)
        return frozenset(out)

    def classify_edges(self) -> tuple[tuple[Edge, ...], tuple[Edge, ...]]:
        """Return ``(external, internal)`` edges; external = incident to a leaf."""
        ext, internal = [], []
        for e in self.edges:
            (ext if e[0] > 0 or e[1] > 0 else internal).append(e)
        return tuple(ext), tuple(internal)


def double_factorial(n: int) -> int:
    """n!! for odd n >= -1 (with (-1)!! = 1)."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def num_cladograms(m: int) -> int:
    """|C_m| = (2m-5)!!."""
    if m < 2:
        raise ValueError("m >= 2 required")
    return double_factorial(2 * m - 5)


@lru_cache(maxsize=None)
def enumerate_cladograms(m: int, m_max: int = MAX_ENUMERATION_LEAVES) -> tuple[Cladogram, ...]:
    """All (2m-5)!! labeled m-cladograms, sorted by canonical key.

    Growth by inserting leaf k+1 at every edge produces each labeled
    cladogram exactly once, so no deduplication is needed.
    """
    if not 2 <= m <= m_max:
        raise StructureError(f"enumeration supports 2 <= m <= {m_max}, got {m}")
    trees = [Cladogram(2, [(1, 2)])]
    for _ in range(m - 2):
        trees = [t.insert_leaf(e) for t in trees for e in t.edges]
    trees.sort(key=lambda t: t.key)
    return tuple(trees)


def shape(tree, samples: Sequence[int]) -> Cladogram:
    """Cladogram spanned by distinct leaves ``samples`` of ``tree``.

    ``tree`` is anything exposing ``branch_point(x, y, z)`` (a finite measure
    tree).  Leaf i of the result carries label i, matching the order of
    ``samples``.  Built incrementally: each new sample attaches strictly
    inside a unique edge of the current spanned subtree because samples are
    leaves of a binary tree.
    """
    m = len(samples)
    if m < 2:
        raise StructureError("need at least 2 sampled leaves")
    if len(set(samples)) != m:
        raise StructureError("sampled leaves must be pairwise distinct")
    edges: list[Edge] = [(1, 2)]
    timg = {1: samples[0], 2: samples[1]}
    next_internal = -1
    for j in range(3, m + 1):
        u = samples[j - 1]
        for i, (p, q) in enumerate(edges):
            z = tree.branch_point(timg[p], timg[q], u)
            if z != timg[p] and z != timg[q]:
                w = next_internal
                next_internal -= 1
                edges[i] = _edge(p, w)
                edges.append(_edge(q, w))
                edges.append(_edge(w, j))
                timg[w] = z
                timg[j] = u
                break
        else:
            raise StructureError("no attachment edge found; tree is not binary")
    return Cladogram(m, edges)


class LabelledCladogram:
    """A cladogram together with a surjective, not necessarily injective,
    label map: label i carries leaf ``labels[i - 1]`` of ``topology``.

    This is what the shape of m sampled points degenerates to when samples
    repeat; with all samples distinct it reduces to a plain cladogram.
    """

    __slots__ = ("topology", "labels")

    def __init__(self, topology: Cladogram, labels: Sequence[int]):
        labels = tuple(int(x) for x in labels)
        if set(labels) != set(topology.leaves):
            raise StructureError("label map must be surjective onto the leaves")
        self.topology = topology
        self.labels = labels

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def is_injective(self) -> bool:
        return len(set(self.labels)) == len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelledCladogram):
            return NotImplemented
        return self.labels == other.labels and self.topology == other.topology

    def __hash__(self) -> int:
        return hash((self.topology, self.labels))

    def __repr__(self) -> str:
        return f"LabelledCladogram(labels={self.labels}, {to_newick(self.topology)!r})"


def labelled_shape(tree, samples: Sequence[int]) -> LabelledCladogram:
    """Shape of ``samples`` with repeats allowed: repeated samples collapse
    onto one leaf of the underlying cladogram, so the label map is surjective
    but not injective.  At least two distinct samples are required."""
    reps: list[int] = []
    labels = []
    for u in samples:
        if u not in reps:
            reps.append(u)
        labels.append(reps.index(u) + 1)
    if len(reps) < 2:
        raise StructureError("need at least 2 distinct sampled leaves")
    return LabelledCladogram(shape(tree, reps), labels)


# -- Newick serialization ------------------------------------------------------


def to_newick(t: Cladogram) -> str:
    """Serialize with integer leaf labels, rooted at the internal vertex
    adjacent to leaf 1 (the sole edge for m = 2)."""
    if t.m == 2:
        return "(1,2);"
    root = t.adjacency[1][0]

    def sub(v: int, parent: int) -> str:
        if v > 0:
            return str(v)
        kids = [w for w in t.adjacency[v] if w != parent]
        return "(" + ",".join(sub(w, v) for w in kids) + ")"

    kids = t.adjacency[root]
    return "(" + ",".join(sub(w, root) for w in kids) + ");"


def from_newick(s: str) -> Cladogram:
    """Parse the output of :func:`to_newick` back into a cladogram.

    Accepts any binary unrooted Newick with integer leaf labels: the top
    level must have 3 children (or 2 for the two-leaf tree), every other
    internal node exactly 2.
    """
    s = s.strip()
    if s.endswith(";"):
        s = s[:-1]
    pos = 0

    def parse() -> tuple:
        nonlocal pos
        if s[pos] == "(":
            pos += 1
            kids = [parse()]
            while s[pos] == ",":
                pos += 1
                kids.append(parse())
            if s[pos] != ")":
                raise StructureError(f"expected ')' at position {pos}")
            pos += 1
            return tuple(kids)
        start = pos
        while pos < len(s) and s[pos] not in ",()":
            pos += 1
        token = s[start:pos]
        if not token.lstrip("-").isdigit():
            raise StructureError(f"leaf label {token!r} is not an integer")
        return (int(token),)

    top = parse()
    if pos != len(s):
        raise StructureError(f"trailing characters at position {pos}")
    if len(top) == 2 and top[0] == (1,) and top[1] == (2,):
        return Cladogram(2, [(1, 2)])

    edges: list[Edge] = []
    counter = [0]

    def build(node: tuple) -> int:
        if len(node) == 1 and isinstance(node[0], int):
            return node[0]
        if len(node) != 2:
            raise StructureError("internal Newick nodes must be binary")
        counter[0] -= 1
        v = counter[0]
        for child in node:
            edges.append(_edge(v, build(child)))
        return v

    if len(top) != 3:
        raise StructureError("unrooted Newick must have 3 children at the top level")
    counter[0] -= 1
    root = counter[0]
    for child in top:
        edges.append(_edge(root, build(child)))
    m = sum(1 for u, v in edges for x in (u, v) if x > 0)
    return Cladogram(m, edges)
