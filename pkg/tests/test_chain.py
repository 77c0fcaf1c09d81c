import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from alphaford._rng import stream
from alphaford.chain import (
    ChainState,
    backward_rate_matrix,
    beta_potential,
    chain_move,
    estimate_shape_polynomial,
    forward_rate_matrix,
    matrix_exponential,
    simulate_chain,
    verify_beta_is_rate_discrepancy,
    verify_chain_diffusion_duality,
    verify_feynman_kac,
    verify_invariance,
)
from alphaford.cladogram import Cladogram, StructureError, enumerate_cladograms
from alphaford.ford import build_comb_tree, exact_distribution, sample_ford_tree
from alphaford.tree import FiniteMeasureTree

from conftest import bf_quartet_partner, random_cladogram

ALPHAS = ["0", "1/4", "1/2", "1"]


# -- chain moves -----------------------------------------------------------------


def test_chain_move_at_merged_edge_is_identity():
    for t in enumerate_cladograms(5):
        for k in t.leaves:
            v = t.adjacency[k][0]
            a, b = (x for x in t.adjacency[v] if x != k)
            reduced = t.delete_leaf(k)
            merged = next(
                e for e in reduced.edges if chain_move(t, k, e) == t
            )
            # exactly one edge of the reduced tree reproduces t
            count = sum(1 for e in reduced.edges if chain_move(t, k, e) == t)
            assert count == 1
            del a, b, merged, v


def test_chain_move_produces_valid_states():
    t = enumerate_cladograms(6)[17]
    for k in (1, 4, 6):
        for e in t.delete_leaf(k).edges:
            got = chain_move(t, k, e)
            assert got.m == 6  # constructor validates the rest


# -- rate matrices -----------------------------------------------------------------


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("m", [4, 5, 6])
def test_forward_total_rate_and_row_sums(alpha, m):
    fwd = forward_rate_matrix(alpha, m)
    fwd.validate()
    af = Fraction(alpha)
    for s in range(len(fwd.states)):
        assert fwd.total_rate(s) == m * (m - 1 - 3 * af)
    dense = fwd.to_dense()
    assert np.abs(dense.sum(axis=1)).max() < 1e-12
    assert (dense - np.diag(np.diag(dense)) >= 0).all()


def test_forward_rate_m5_alpha0_total_twenty():
    fwd = forward_rate_matrix(0, 5)
    assert all(fwd.total_rate(s) == 20 for s in range(15))


def test_m4_matrix_shape_and_communication():
    fwd = forward_rate_matrix("1/4", 4)
    dense = fwd.to_dense()
    assert dense.shape == (3, 3)
    off = dense[~np.eye(3, dtype=bool)]
    assert (off > 0).all()  # all states communicate directly for alpha < 1


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("m", [4, 5, 6])
def test_reversal_identity(alpha, m):
    fwd = forward_rate_matrix(alpha, m)
    bwd = backward_rate_matrix(alpha, m)
    n = len(fwd.states)
    for s in range(n):
        for t, r in fwd.rows[s].items():
            assert bwd.rows[t].get(s, Fraction(0)) == r
    for t in range(n):
        for s, r in bwd.rows[t].items():
            assert fwd.rows[s].get(t, Fraction(0)) == r


@pytest.mark.parametrize("alpha", ALPHAS)
def test_backward_total_rate_formula(alpha):
    m = 6
    bwd = backward_rate_matrix(alpha, m)
    af = Fraction(alpha)
    for s, t in enumerate(bwd.states):
        ch = len(t.cherries())
        assert bwd.total_rate(s) == (2 * m - 5) * ((1 - af) * ch + af * (m - ch))


def test_alpha_half_backward_equals_forward():
    fwd = forward_rate_matrix("1/2", 5)
    bwd = backward_rate_matrix("1/2", 5)
    assert fwd.rows == bwd.rows
    q = fwd.to_dense()
    assert np.abs(q - q.T).max() == 0


# -- potential ---------------------------------------------------------------------


def test_beta_zero_at_m4():
    beta = beta_potential("1/4", 4)
    assert all(v == 0 for v in beta.values())


def test_beta_m6_caterpillar_and_balanced():
    beta = beta_potential(0, 6)
    cat = build_comb_tree(6).topology
    assert beta[cat.key] == 4 * 7 - 30 == -2
    balanced = Cladogram(
        6,
        [(1, -1), (2, -1), (3, -2), (4, -2), (5, -3), (6, -3), (-1, -4), (-2, -4), (-3, -4)],
    )
    assert beta[balanced.key] == 6 * 7 - 30 == 12


def test_beta_vanishes_at_half():
    assert all(v == 0 for v in beta_potential("1/2", 6).values())


@pytest.mark.parametrize("alpha", ALPHAS + ["1/3"])
@pytest.mark.parametrize("m", [4, 5, 6])
def test_beta_is_rate_discrepancy(alpha, m):
    assert verify_beta_is_rate_discrepancy(alpha, m)


# -- invariance ---------------------------------------------------------------------


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("m", [4, 5, 6])
def test_invariance_exact(alpha, m):
    assert verify_invariance(alpha, m) == 0


def test_m4_uniform_is_stationary():
    # symmetry of the 3-state chain; also pi Q = 0 in floats
    fwd = forward_rate_matrix("3/4", 4)
    pi = np.full(3, 1 / 3)
    assert np.abs(pi @ fwd.to_dense()).max() < 1e-12


# -- matrix exponential ---------------------------------------------------------------


def test_expm_zero_time_is_identity():
    q = forward_rate_matrix(0, 5).to_dense()
    assert np.allclose(matrix_exponential(q, 0.0), np.eye(15), atol=1e-14)


@pytest.mark.parametrize("t", [0.1, 1.0])
def test_expm_generator_rows_sum_to_one(t):
    q = forward_rate_matrix("1/4", 5).to_dense()
    p = matrix_exponential(q, t)
    assert np.abs(p.sum(axis=1) - 1).max() < 1e-10
    assert p.min() > -1e-12


def test_expm_diagonal_case():
    got = matrix_exponential(np.diag([1.0, -2.0]), 0.7)
    assert np.allclose(got, np.diag([math.exp(0.7), math.exp(-1.4)]), rtol=1e-12)


def test_expm_guards():
    with pytest.raises(ValueError):
        matrix_exponential(np.ones((2, 3)))
    with pytest.raises(ValueError):
        matrix_exponential(np.full((2, 2), np.nan))


# -- Feynman-Kac ---------------------------------------------------------------------


def test_feynman_kac_m4_tight():
    assert verify_feynman_kac("1/4", 4, 1.0) < 1e-10


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("m", [4, 5])
def test_feynman_kac_small(alpha, m):
    assert verify_feynman_kac(alpha, m, 0.5) < 1e-8


def test_feynman_kac_exact_matrix_identity():
    # Q_fwd^T equals Q_bwd + diag(beta) entry by entry, exactly
    for alpha in ("0", "1/3", "1"):
        m = 5
        fwd = forward_rate_matrix(alpha, m)
        bwd = backward_rate_matrix(alpha, m)
        beta = beta_potential(alpha, m)
        n = len(fwd.states)
        for s in range(n):
            for t in range(n):
                lhs = fwd.entry(t, s)
                rhs = bwd.entry(s, t) + (beta[fwd.states[s].key] if s == t else 0)
                assert lhs == rhs, (alpha, s, t)


# -- simulator ---------------------------------------------------------------------


def test_chain_state_requires_five_leaves():
    with pytest.raises(StructureError):
        ChainState(build_comb_tree(4), "1/2", stream(0))


def test_simulator_preserves_invariants():
    state = ChainState(sample_ford_tree("1/2", 30, stream(12)), "1/2", stream(13))
    for _ in range(200):
        state.move()
    state.audit()
    for _ in range(5):
        state.run_until(state.time + 0.2)
        state.audit()


def test_simulator_jump_count_concentration():
    n, alpha, horizon = 40, 0.25, 3.0
    state = ChainState(sample_ford_tree("1/4", n, stream(14)), "1/4", stream(15))
    state.run_until(horizon)
    expected = horizon * n * (n - 1 - 3 * alpha)
    assert abs(state.jumps - expected) < 6 * math.sqrt(expected)


def test_simulator_million_moves_audit():
    state = ChainState(sample_ford_tree("1/3", 64, stream(29)), "1/3", stream(30))
    for _ in range(10):
        for _ in range(100_000):
            state.move()
        state.audit()


def test_simulator_self_moves_leave_state_unchanged():
    state = ChainState(build_comb_tree(8), "0", stream(16))
    before = state.as_tree().topology
    moved = [state.move() for _ in range(300)]
    assert any(moved) and not all(moved)
    state.audit()
    del before


def test_simulate_chain_observers():
    state = ChainState(sample_ford_tree("1/2", 20, stream(17)), "1/2", stream(18))
    seen = []
    summary = simulate_chain(
        state,
        horizon=1.0,
        observe_times=[0.25, 0.5],
        observers=[lambda s: s.time, lambda s: s.jumps],
    )
    assert [t for t, _ in summary["observations"]] == [0.25, 0.5, 1.0]
    assert summary["jumps"] == state.jumps
    del seen


def test_long_run_shape_frequencies_reach_uniform():
    # N = 50, alpha = 1/2: after a burn-in the m = 4 sample-shape estimates sit
    # at 1/3 each (they do for every binary tree; this catches simulator bias)
    state = ChainState(sample_ford_tree("1/2", 50, stream(19)), "1/2", stream(20))
    state.run_until(2.0)
    tree = state.as_tree()
    rng = stream(21)
    for target in enumerate_cladograms(4):
        est, se = estimate_shape_polynomial(tree, 4, target, 40000, rng)
        expect = (49 / 50) * (48 / 50) * (47 / 50) / 3
        assert abs(est - expect) < 3 * se + 1e-12


# -- shape polynomial estimation ------------------------------------------------------


def exhaustive_shape_polynomial(tree: FiniteMeasureTree, target: Cladogram) -> Fraction:
    """Sum over all ordered leaf m-tuples (the defining integral, verbatim)."""
    n, m = tree.n, target.m
    hits = 0
    for tup in itertools.product(range(1, n + 1), repeat=m):
        if len(set(tup)) != m:
            continue
        if m == 3:
            hits += 1
            continue
        code = bf_quartet_partner(tree.topology, *tup)
        partner_of_one = {1: 2, 2: 3, 3: 4}[code]
        v = target.adjacency[1][0]
        target_partner = next(x for x in target.adjacency[v] if x > 0 and x != 1)
        hits += partner_of_one == target_partner
    return Fraction(hits, n**m)


def test_shape_polynomial_m3_exact_count():
    t3 = enumerate_cladograms(3)[0]
    for n in (5, 9, 30):
        ft = build_comb_tree(n)
        exact = Fraction(n * (n - 1) * (n - 2), n**3)
        assert exhaustive_shape_polynomial(ft, t3) == exact if n <= 9 else True
        est, se = estimate_shape_polynomial(ft, 3, t3, 20000, stream(22))
        assert abs(est - float(exact)) < 4 * se + 1e-12


def test_shape_polynomial_m4_exhaustive_oracle():
    ft = FiniteMeasureTree(Cladogram(4, [(1, -1), (2, -1), (3, -2), (4, -2), (-1, -2)]))
    for target in enumerate_cladograms(4):
        exact = exhaustive_shape_polynomial(ft, target)
        est, se = estimate_shape_polynomial(ft, 4, target, 60000, stream(23))
        assert abs(est - float(exact)) < 4 * se + 1e-12
    match = Cladogram(4, [(1, -1), (2, -1), (3, -2), (4, -2), (-1, -2)])
    assert exhaustive_shape_polynomial(ft, match) == Fraction(8, 256)


def test_shape_polynomial_sum_is_distinct_probability():
    ft = build_comb_tree(12)
    rng = stream(24)
    total = sum(
        estimate_shape_polynomial(ft, 4, target, 30000, rng)[0]
        for target in enumerate_cladograms(4)
    )
    p_distinct = (11 / 12) * (10 / 12) * (9 / 12)
    assert abs(total - p_distinct) < 0.02


def test_shape_polynomial_generic_path_m5():
    ft = build_comb_tree(10)
    targets = enumerate_cladograms(5)
    est, se = estimate_shape_polynomial(ft, 5, targets[0], 2000, stream(25))
    assert 0 <= est <= 1 and se >= 0


# -- chain-vs-dual duality -------------------------------------------------------------


def test_duality_time_zero_matches_initial_polynomials():
    checks = verify_chain_diffusion_duality("1/2", 4, 64, 0.0, replicates=40, seed=26)
    for c in checks:
        assert abs(c.lhs - c.rhs) < 4 * math.sqrt(c.lhs_se**2 + c.rhs_se**2) + 1e-9


@pytest.mark.parametrize("alpha", ["0", "1/2"])
def test_duality_small(alpha):
    checks = verify_chain_diffusion_duality(alpha, 4, 64, 0.05, replicates=400, seed=27)
    for c in checks:
        assert abs(c.z_score) < 4


def test_duality_m5():
    # m = 5 runs the generic shape estimator; the finite-size generator gap
    # is O(1/N), far below Monte Carlo noise at these sizes
    checks = verify_chain_diffusion_duality(
        "1/2", 5, 128, 0.05, replicates=150, seed=28, phi_samples=40_000
    )
    assert len(checks) == 15
    for c in checks:
        assert abs(c.z_score) < 4


def test_duality_rejects_large_m():
    with pytest.raises(StructureError):
        verify_chain_diffusion_duality("1/2", 6, 64, 0.05, replicates=10)
