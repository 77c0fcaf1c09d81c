import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphaford.cladogram import Cladogram, StructureError, enumerate_cladograms
from alphaford.ford import build_comb_tree
from alphaford.tree import FiniteMeasureTree

from conftest import bf_median, bf_path, bf_quartet_partner, random_cladogram

BALANCED4 = Cladogram(4, [(1, -1), (2, -1), (3, -2), (4, -2), (-1, -2)])


def bf_nu(t: Cladogram) -> dict[int, Fraction]:
    """Branch point distribution by full enumeration of ordered leaf triples."""
    n = t.m
    counts = Counter(
        bf_median(t, x, y, z)
        for x in range(1, n + 1)
        for y in range(1, n + 1)
        for z in range(1, n + 1)
    )
    return {v: Fraction(c, n**3) for v, c in counts.items()}


def bf_r_mu(t: Cladogram, x: int, y: int) -> Fraction:
    nu = bf_nu(t)
    total = sum((nu.get(v, Fraction(0)) for v in bf_path(t, x, y)), Fraction(0))
    return total - Fraction(1, 2) * nu.get(x, Fraction(0)) - Fraction(1, 2) * nu.get(y, Fraction(0))


def test_branch_point_two_point_condition(rng):
    ft = FiniteMeasureTree(random_cladogram(rng, 12))
    vs = ft.topology.vertices
    for _ in range(200):
        x, y = rng.choice(len(vs), size=2)
        assert ft.branch_point(vs[x], vs[y], vs[y]) == vs[y]


def test_branch_point_three_point_condition(rng):
    ft = FiniteMeasureTree(random_cladogram(rng, 12))
    vs = ft.topology.vertices
    for _ in range(200):
        x, y, z = (vs[i] for i in rng.choice(len(vs), size=3))
        c = ft.branch_point(x, y, z)
        assert ft.branch_point(x, y, c) == c


def test_branch_point_four_point_condition(rng):
    ft = FiniteMeasureTree(random_cladogram(rng, 10))
    vs = ft.topology.vertices
    for _ in range(200):
        x1, x2, x3, x4 = (vs[i] for i in rng.choice(len(vs), size=4))
        c = ft.branch_point(x1, x2, x3)
        assert c in {
            ft.branch_point(x1, x2, x4),
            ft.branch_point(x1, x3, x4),
            ft.branch_point(x2, x3, x4),
        }


def test_branch_point_symmetry_and_oracle(rng):
    t = random_cladogram(rng, 9)
    ft = FiniteMeasureTree(t)
    for x, y, z in itertools.combinations(range(1, 10), 3):
        expect = bf_median(t, x, y, z)
        for perm in itertools.permutations((x, y, z)):
            assert ft.branch_point(*perm) == expect


def test_branch_point_of_cherry_triplet():
    ft = FiniteMeasureTree(BALANCED4)
    v = ft.branch_point(1, 2, 3)
    assert v == ft.topology.adjacency[1][0]


def test_component_masses_four_leaf():
    ft = FiniteMeasureTree(BALANCED4)
    assert ft.component_masses((1, 2, 3)) == (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2))


def test_component_masses_comb_positions():
    n = 12
    ft = build_comb_tree(n)
    for j in range(3, n - 1):
        # leaf j is the tooth at spine position j - 1
        masses = ft.component_masses((1, j, n))
        assert masses == (Fraction(j - 1, n), Fraction(1, n), Fraction(n - j, n))


def test_component_masses_permutation_and_total(rng):
    t = random_cladogram(rng, 15)
    ft = FiniteMeasureTree(t)
    for _ in range(50):
        u = tuple(int(x) for x in rng.choice(15, size=3, replace=False) + 1)
        masses = ft.component_masses(u)
        assert sum(masses) == 1
        assert all(x >= Fraction(1, 15) for x in masses)
        perm = tuple(int(i) for i in rng.permutation(3))
        permuted = ft.component_masses(tuple(u[i] for i in perm))
        assert permuted == tuple(masses[i] for i in perm)


def test_component_masses_rejects_duplicates():
    ft = build_comb_tree(6)
    with pytest.raises(StructureError):
        ft.component_masses((1, 1, 2))


def test_nu_two_leaf_brute_force():
    ft = FiniteMeasureTree(Cladogram(2, [(1, 2)]))
    nu = ft.branch_point_distribution()
    assert nu == {1: Fraction(1, 2), 2: Fraction(1, 2)}
    assert nu == bf_nu(ft.topology)


def test_nu_balanced_four():
    ft = FiniteMeasureTree(BALANCED4)
    nu = ft.branch_point_distribution()
    v = ft.topology.adjacency[1][0]
    assert nu[v] == Fraction(3, 16)
    assert nu == bf_nu(BALANCED4)


@pytest.mark.parametrize("m", [5, 8, 11])
def test_nu_matches_brute_force(m, rng):
    for _ in range(3):
        t = random_cladogram(rng, m)
        ft = FiniteMeasureTree(t)
        assert ft.branch_point_distribution() == bf_nu(t)


def test_nu_sums_to_one_larger_trees(rng):
    for m in (20, 35, 50):
        ft = FiniteMeasureTree(random_cladogram(rng, m))
        assert sum(ft.branch_point_distribution().values()) == 1


def test_nu_brute_force_at_n30(rng):
    # combination-based oracle: distinct triples contribute 6 ordered ones to
    # their median, each leaf picks up the 3n - 2 tuples with a repeat on it
    n = 30
    t = random_cladogram(rng, n)
    counts = Counter()
    for x, y, z in itertools.combinations(range(1, n + 1), 3):
        counts[bf_median(t, x, y, z)] += 6
    for leaf in range(1, n + 1):
        counts[leaf] += 3 * n - 2
    expected = {v: Fraction(c, n**3) for v, c in counts.items()}
    got = FiniteMeasureTree(t).branch_point_distribution()
    assert {v: p for v, p in got.items() if p} == expected


def test_r_mu_diagonal_and_symmetry(rng):
    ft = FiniteMeasureTree(random_cladogram(rng, 10))
    vs = ft.topology.vertices
    for v in vs:
        assert ft.r_mu(v, v) == 0
    for _ in range(50):
        x, y = (vs[i] for i in rng.choice(len(vs), size=2))
        assert ft.r_mu(x, y) == ft.r_mu(y, x)
        assert ft.r_mu(x, y) >= 0


def test_r_mu_brute_force_and_balanced_four(rng):
    ft = FiniteMeasureTree(BALANCED4)
    va, vb = sorted(BALANCED4.internal_vertices, reverse=True)
    assert ft.r_mu(va, vb) == bf_r_mu(BALANCED4, va, vb)
    for m in (6, 9):
        t = random_cladogram(rng, m)
        ft = FiniteMeasureTree(t)
        for x, y in itertools.combinations(t.vertices, 2):
            assert ft.r_mu(x, y) == bf_r_mu(t, x, y)


def test_r_mu_brute_force_at_n20(rng):
    t = random_cladogram(rng, 20)
    ft = FiniteMeasureTree(t)
    nu = bf_nu(t)
    vs = t.vertices
    pairs = [tuple(vs[i] for i in rng.choice(len(vs), size=2, replace=False)) for _ in range(25)]
    for x, y in pairs:
        total = sum((nu.get(v, Fraction(0)) for v in bf_path(t, x, y)), Fraction(0))
        expected = total - Fraction(1, 2) * nu.get(x, Fraction(0)) - Fraction(1, 2) * nu.get(y, Fraction(0))
        assert ft.r_mu(x, y) == expected


@pytest.mark.parametrize("m", [6, 12, 20])
def test_r_mu_triangle_inequality(m, rng):
    ft = FiniteMeasureTree(random_cladogram(rng, m))
    vs = ft.topology.vertices
    cache = {}

    def r(x, y):
        if (x, y) not in cache:
            cache[(x, y)] = cache[(y, x)] = ft.r_mu(x, y)
        return cache[(x, y)]

    triples = itertools.combinations(vs, 3) if m <= 12 else (
        tuple(vs[i] for i in np.random.default_rng(1).choice(len(vs), 3, replace=False))
        for _ in range(300)
    )
    for x, y, z in triples:
        assert r(x, z) <= r(x, y) + r(y, z)
        assert r(x, y) <= r(x, z) + r(z, y)
        assert r(y, z) <= r(y, x) + r(x, z)


def test_interval_endpoints_and_identity(rng):
    t = random_cladogram(rng, 8)
    ft = FiniteMeasureTree(t)
    for x, y in itertools.combinations(t.vertices, 2):
        path = ft.interval(x, y)
        assert path[0] == x and path[-1] == y
        assert set(path) == set(bf_path(t, x, y))
    assert ft.interval(3, 3) == (3,)


def test_quartet_partners_against_oracle(rng):
    t = random_cladogram(rng, 11)
    ft = FiniteMeasureTree(t)
    quads = [rng.choice(11, size=4, replace=False) + 1 for _ in range(100)]
    arr = np.array(quads)
    codes = ft.quartet_partners(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    for row, code in zip(quads, codes):
        assert code == bf_quartet_partner(t, *(int(x) for x in row))


def test_triple_component_counts_matches_exact(rng):
    t = random_cladogram(rng, 13)
    ft = FiniteMeasureTree(t)
    trips = np.array([rng.choice(13, size=3, replace=False) + 1 for _ in range(80)])
    counts = ft.triple_component_counts(trips[:, 0], trips[:, 1], trips[:, 2])
    for row, cnt in zip(trips, counts):
        assert tuple(cnt) == ft.component_leaf_counts(tuple(int(x) for x in row))


def test_sample_distinct_leaves(rng):
    ft = build_comb_tree(10)
    draws = ft.sample_distinct_leaves(500, 4, rng)
    assert draws.shape == (500, 4)
    assert draws.min() >= 1 and draws.max() <= 10
    for row in draws:
        assert len(set(row.tolist())) == 4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 16))
def test_index_against_oracle_random(seed, m):
    rng = np.random.default_rng(seed)
    t = random_cladogram(rng, m)
    ft = FiniteMeasureTree(t)
    vs = t.vertices
    x, y, z = (vs[int(i)] for i in rng.integers(0, len(vs), size=3))
    assert ft.branch_point(x, y, z) == bf_median(t, x, y, z)
