"""Forward and backward alpha-Ford chains on m-cladograms.

A chain move erases the edge holding leaf k, splits the remaining tree at an
edge e, and reinserts the leaf there.  Forward rates weight e by 1 - alpha
(external in the reduced tree) or alpha (internal); the backward chain
instead weighs the pair by whether k is a cherry.  Reinsertion at the edge
the deletion just merged reproduces the state: these self-moves carry rate
(1-alpha) per cherry and alpha per non-cherry leaf, identically for both
chains, and are kept on the clock (they contribute to the total rate
m(m-1-3 alpha)) while adding nothing to the generator.

The module builds exact rational rate matrices over canonically ordered
states, the cherry-count potential linking the two chains, and verifiers for
the reversal identity, the rate-discrepancy identity, stationarity of the
alpha-Ford law, and the Feynman-Kac matrix identity

    exp(t Q_fwd) = exp(t (Q_bwd + diag(beta)))^T.

An event-driven simulator with O(1) moves runs the same dynamics on trees
with hundreds of leaves, with shape-polynomial observables estimated by
Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg

from alphaford._rng import parse_alpha, stream
from alphaford.cladogram import Cladogram, StructureError, enumerate_cladograms
from alphaford.ford import exact_distribution, sample_ford_tree
from alphaford.tree import FiniteMeasureTree

__all__ = [
    "RateMatrix",
    "ChainState",
    "DualityCheck",
    "chain_move",
    "forward_rate_matrix",
    "backward_rate_matrix",
    "beta_potential",
    "verify_beta_is_rate_discrepancy",
    "verify_invariance",
    "matrix_exponential",
    "verify_feynman_kac",
    "simulate_chain",
    "estimate_shape_polynomial",
    "estimate_shape_vector",
    "verify_chain_diffusion_duality",
]

MAX_RATE_MATRIX_LEAVES = 7
MAX_EXPM_DIM = 1024


def chain_move(t: Cladogram, k: int, edge) -> Cladogram:
    """The state reached by removing leaf k and reinserting it at ``edge`` of
    the reduced (m-1)-cladogram."""
    return t.delete_leaf(k).insert_leaf(edge, new_label=k)


@lru_cache(maxsize=None)
def _move_tables(m: int):
    """Per-state move targets of the m-leaf chain, classified both ways.

    For state s, ``fwd_ext[s]``/``fwd_int[s]`` count non-self moves by the
    class of the insertion edge, ``bwd_ch[s]``/``bwd_non[s]`` the same moves
    by whether the displaced leaf is a cherry.  Every (k, e) pair with
    e the merged edge is a self-move; there are exactly m of them per state.
    """
    if not 4 <= m <= MAX_RATE_MATRIX_LEAVES:
        raise StructureError(f"rate matrices support 4 <= m <= {MAX_RATE_MATRIX_LEAVES}")
    states = enumerate_cladograms(m)
    index = {t.key: i for i, t in enumerate(states)}
    fwd_ext: list[dict[int, int]] = []
    fwd_int: list[dict[int, int]] = []
    bwd_ch: list[dict[int, int]] = []
    bwd_non: list[dict[int, int]] = []
    n_cherries = []
    for s, t in enumerate(states):
        fe: dict[int, int] = {}
        fi: dict[int, int] = {}
        bc: dict[int, int] = {}
        bn: dict[int, int] = {}
        cherries = t.cherries()
        self_moves = 0
        for k in t.leaves:
            reduced = t.delete_leaf(k)
            is_cherry = k in cherries
            for e in reduced.edges:
                tgt = index[reduced.insert_leaf(e, new_label=k).key]
                if tgt == s:
                    self_moves += 1
                    continue
                external = e[0] > 0 or e[1] > 0
                (fe if external else fi)[tgt] = (fe if external else fi).get(tgt, 0) + 1
                (bc if is_cherry else bn)[tgt] = (bc if is_cherry else bn).get(tgt, 0) + 1
        assert self_moves == m
        fwd_ext.append(fe)
        fwd_int.append(fi)
        bwd_ch.append(bc)
        bwd_non.append(bn)
        n_cherries.append(len(cherries))
    return states, index, fwd_ext, fwd_int, bwd_ch, bwd_non, tuple(n_cherries)


@dataclass(frozen=True)
class RateMatrix:
    """Generator of a chain on the canonically ordered m-cladograms.

    ``rows[s]`` maps target indices to exact off-diagonal rates; the diagonal
    is minus the row sum.  ``self_rates[s]`` tracks the rate of moves that
    reproduce the state; they are excluded from the generator but belong to
    the total-rate accounting.
    """

    alpha: Fraction
    m: int
    kind: str
    states: tuple
    index: dict
    rows: tuple
    self_rates: tuple

    def off_diagonal_total(self, s: int) -> Fraction:
        return sum(self.rows[s].values(), Fraction(0))

    def total_rate(self, s: int) -> Fraction:
        """Total event rate at state s, self-moves included."""
        return self.off_diagonal_total(s) + self.self_rates[s]

    def entry(self, s: int, t: int) -> Fraction:
        if s == t:
            return -self.off_diagonal_total(s)
        return self.rows[s].get(t, Fraction(0))

    def to_dense(self) -> np.ndarray:
        """Float generator matrix (rows sum to zero)."""
        n = len(self.states)
        q = np.zeros((n, n))
        for s, row in enumerate(self.rows):
            for t, r in row.items():
                q[s, t] = float(r)
            q[s, s] = -q[s].sum()
        return q

    def validate(self) -> None:
        for s in range(len(self.states)):
            assert all(r >= 0 for r in self.rows[s].values())
            assert self.self_rates[s] >= 0


def _assemble(alpha: Fraction, m: int, kind: str, weight_a, weight_b, tables_a, tables_b):
    states, index, *_ = _move_tables(m)
    _, _, _, _, _, _, n_cherries = _move_tables(m)
    rows = []
    self_rates = []
    for s in range(len(states)):
        row: dict[int, Fraction] = {}
        for tgt, c in tables_a[s].items():
            if weight_a:
                row[tgt] = row.get(tgt, Fraction(0)) + weight_a * c
        for tgt, c in tables_b[s].items():
            if weight_b:
                row[tgt] = row.get(tgt, Fraction(0)) + weight_b * c
        rows.append(row)
        ch = n_cherries[s]
        self_rates.append((1 - alpha) * ch + alpha * (m - ch))
    return RateMatrix(alpha, m, kind, states, index, tuple(rows), tuple(self_rates))


def forward_rate_matrix(alpha, m: int) -> RateMatrix:
    """Forward chain: insertion edges weighted 1 - alpha (external) / alpha
    (internal).  Total rate at every state is m(m - 1 - 3 alpha)."""
    alpha = parse_alpha(alpha)
    states, index, fwd_ext, fwd_int, *_ = _move_tables(m)
    return _assemble(alpha, m, "forward", 1 - alpha, alpha, fwd_ext, fwd_int)


def backward_rate_matrix(alpha, m: int) -> RateMatrix:
    """Backward chain: displaced leaf weighted 1 - alpha (cherry) / alpha
    (non-cherry), any insertion edge.  Entrywise q_bwd(t', t) = q_fwd(t, t')."""
    alpha = parse_alpha(alpha)
    states, index, _, _, bwd_ch, bwd_non, _ = _move_tables(m)
    return _assemble(alpha, m, "backward", 1 - alpha, alpha, bwd_ch, bwd_non)


def beta_potential(alpha, m: int) -> dict:
    """The potential beta(t) = (1 - 2 alpha) (#cherries(t) (2m - 5) - m(m - 1)),
    keyed by canonical key; identically zero at alpha = 1/2."""
    alpha = parse_alpha(alpha)
    states, *_ , n_cherries = _move_tables(m)
    return {
        t.key: (1 - 2 * alpha) * (n_cherries[s] * (2 * m - 5) - m * (m - 1))
        for s, t in enumerate(states)
    }


def _beta_vector(alpha, m: int) -> list[Fraction]:
    states, *_, n_cherries = _move_tables(m)
    alpha = parse_alpha(alpha)
    return [
        (1 - 2 * alpha) * (c * (2 * m - 5) - m * (m - 1)) for c in n_cherries
    ]


def verify_beta_is_rate_discrepancy(alpha, m: int) -> bool:
    """Exact check: total backward rate minus total forward rate equals the
    potential at every state (self-moves included on both sides)."""
    fwd = forward_rate_matrix(alpha, m)
    bwd = backward_rate_matrix(alpha, m)
    beta = _beta_vector(alpha, m)
    return all(
        bwd.total_rate(s) - fwd.total_rate(s) == beta[s] for s in range(len(fwd.states))
    )


def verify_invariance(alpha, m: int) -> Fraction:
    """Exact residual of the stationarity identity

        m(m - 1 - 3 alpha) P(t') = sum_t P(t) q_raw(t, t'),

    with q_raw including self-moves on the diagonal.  Returns the maximum
    absolute residual (zero iff the alpha-Ford law is stationary)."""
    alpha = parse_alpha(alpha)
    fwd = forward_rate_matrix(alpha, m)
    dist = exact_distribution(alpha, m)
    pi = dist.as_vector(fwd.states)
    n = len(fwd.states)
    inflow = [pi[s] * fwd.self_rates[s] for s in range(n)]
    for s, row in enumerate(fwd.rows):
        ps = pi[s]
        if ps:
            for t, r in row.items():
                inflow[t] += ps * r
    lhs = m * (m - 1 - 3 * alpha)
    return max(abs(lhs * pi[t] - inflow[t]) for t in range(n))


def matrix_exponential(mat: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(t * mat) by scaling-and-squaring (scipy's Pade implementation)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix_exponential needs a square matrix")
    if mat.shape[0] > MAX_EXPM_DIM:
        raise ValueError(f"dimension {mat.shape[0]} exceeds guard {MAX_EXPM_DIM}")
    if not np.isfinite(mat).all():
        raise ValueError("matrix entries must be finite")
    return scipy.linalg.expm(t * mat)


def verify_feynman_kac(alpha, m: int, t: float) -> float:
    """Max entrywise |exp(t Q_fwd) - exp(t (Q_bwd + diag beta))^T|.

    The underlying matrix identity Q_fwd^T = Q_bwd + diag(beta) is exact, so
    the deviation only measures floating-point exponentiation error."""
    qf = forward_rate_matrix(alpha, m).to_dense()
    qb = backward_rate_matrix(alpha, m).to_dense()
    beta = np.array([float(b) for b in _beta_vector(alpha, m)])
    lhs = matrix_exponential(qf, t)
    rhs = matrix_exponential(qb + np.diag(beta), t)
    return float(np.abs(lhs - rhs.T).max())


# -- event-driven simulation ----------------------------------------------------


class ChainState:
    """Mutable N-leaf tree evolving under the alpha-Ford chain.

    Dense vertex ids: leaves 0..N-1, internal vertices N..2N-3.  External and
    internal edge pools are kept as swap-remove arrays so every move is O(1).
    The clock includes self-moves: events arrive at rate N(N - 1 - 3 alpha)
    and a move reinserting the leaf where it stood leaves the state unchanged.
    """

    def __init__(self, tree: FiniteMeasureTree, alpha, rng: np.random.Generator):
        alpha = parse_alpha(alpha)
        n = tree.n
        if n < 5:
            raise StructureError("chain simulation needs at least 5 leaves")
        self.n = n
        self.alpha = float(alpha)
        top = tree.topology
        internal_ids = sorted(top.internal_vertices, reverse=True)
        dense = {leaf: leaf - 1 for leaf in top.leaves}
        dense.update({v: n + i for i, v in enumerate(internal_ids)})
        self.nbr: list[list[int]] = [[] for _ in range(2 * n - 2)]
        self._edge_pos: dict[tuple[int, int], tuple[int, int]] = {}
        self._pools: tuple[list, list] = ([], [])
        for u, v in top.edges:
            du, dv = dense[u], dense[v]
            self.nbr[du].append(dv)
            self.nbr[dv].append(du)
            self._add_edge(du, dv)
        # class weights for picking the insertion edge in the reduced tree
        self._w_ext = (1.0 - self.alpha) * (n - 1)
        self._w_int = self.alpha * (n - 4)
        self.total_rate = n * (n - 1 - 3 * self.alpha)
        self.time = 0.0
        self.jumps = 0
        self.rng = rng

    # edge bookkeeping ---------------------------------------------------------

    def _add_edge(self, u: int, v: int) -> None:
        e = (u, v) if u < v else (v, u)
        cls = 0 if e[0] < self.n else 1
        pool = self._pools[cls]
        self._edge_pos[e] = (cls, len(pool))
        pool.append(e)

    def _remove_edge(self, u: int, v: int) -> None:
        e = (u, v) if u < v else (v, u)
        cls, i = self._edge_pos.pop(e)
        pool = self._pools[cls]
        last = pool.pop()
        if last != e:
            pool[i] = last
            self._edge_pos[last] = (cls, i)

    # dynamics -----------------------------------------------------------------

    def move(self) -> bool:
        """Execute one chain event; returns False for a self-move."""
        rng = self.rng
        n = self.n
        k = int(rng.integers(n))
        v = self.nbr[k][0]
        nv = self.nbr[v]
        a, b = (x for x in nv if x != k)
        leaf_nb = a if a < n else b if b < n else -1
        pick_ext = rng.random() * (self._w_ext + self._w_int) < self._w_ext
        ext_pool, int_pool = self._pools
        if pick_ext:
            kv = (k, v) if k < v else (v, k)
            vl = None if leaf_nb < 0 else ((leaf_nb, v) if leaf_nb < v else (v, leaf_nb))
            while True:
                e = ext_pool[int(rng.integers(len(ext_pool)))]
                if e == kv:
                    continue
                if e == vl:
                    return False  # reinsertion at the merged edge
                break
        else:
            ints = [x for x in (a, b) if x >= n]
            reject = (ints[0], v) if ints[0] < v else (v, ints[0])
            self_edge = None
            if len(ints) == 2:
                self_edge = (ints[1], v) if ints[1] < v else (v, ints[1])
            while True:
                e = int_pool[int(rng.integers(len(int_pool)))]
                if e == reject:
                    continue
                if e == self_edge:
                    return False
                break
        p, q = e
        # splice v out: neighbors a, b become adjacent
        na, nb_ = self.nbr[a], self.nbr[b]
        na[na.index(v)] = b
        nb_[nb_.index(v)] = a
        self._remove_edge(v, a)
        self._remove_edge(v, b)
        self._add_edge(a, b)
        # splice v into edge (p, q)
        np_, nq = self.nbr[p], self.nbr[q]
        np_[np_.index(q)] = v
        nq[nq.index(p)] = v
        self.nbr[v] = [k, p, q]
        self._remove_edge(p, q)
        self._add_edge(v, p)
        self._add_edge(v, q)
        return True

    def run_until(self, horizon: float) -> int:
        """Advance the exponential clock to ``horizon``; returns jumps taken."""
        rng = self.rng
        rate = self.total_rate
        taken = 0
        t = self.time
        buf = rng.exponential(scale=1.0 / rate, size=64)
        i = 0
        while True:
            if i == len(buf):
                buf = rng.exponential(scale=1.0 / rate, size=len(buf) * 2)
                i = 0
            t2 = t + buf[i]
            i += 1
            if t2 >= horizon:
                self.time = horizon
                return taken
            t = t2
            self.time = t
            self.move()
            self.jumps += 1
            taken += 1

    def as_tree(self) -> FiniteMeasureTree:
        """Snapshot of the current state as an immutable measure tree."""
        n = self.n
        edges = []
        for pool in self._pools:
            for u, v in pool:
                uu = u + 1 if u < n else n - u - 1
                vv = v + 1 if v < n else n - v - 1
                edges.append((uu, vv))
        return FiniteMeasureTree(Cladogram(n, edges))

    def audit(self) -> None:
        """Full invariant check (test builds call this periodically)."""
        n = self.n
        assert len(self._pools[0]) == n
        assert len(self._pools[1]) == n - 3
        for i in range(n):
            assert len(self.nbr[i]) == 1
        for i in range(n, 2 * n - 2):
            assert len(self.nbr[i]) == 3
        for cls, pool in enumerate(self._pools):
            for i, e in enumerate(pool):
                assert self._edge_pos[e] == (cls, i)
                assert e[1] in self.nbr[e[0]] and e[0] in self.nbr[e[1]]
        self.as_tree()  # runs the full Cladogram validation


def simulate_chain(state: ChainState, horizon: float, observe_times=(), observers=()):
    """Run ``state`` to ``horizon``, calling each observer at the requested
    times (and at the horizon).  Returns a trajectory summary."""
    times = sorted(set(float(t) for t in observe_times) | {float(horizon)})
    if times[0] < state.time:
        raise ValueError("observation times must not precede the current time")
    observations = []
    jumps = 0
    for t in times:
        jumps += state.run_until(t)
        observations.append((t, [obs(state) for obs in observers]))
    return {"time": state.time, "jumps": jumps, "observations": observations}


def _quartet_code_of_target(target: Cladogram) -> int:
    v = target.adjacency[1][0]
    partner = next(x for x in target.adjacency[v] if x > 0 and x != 1)
    return partner - 1  # 1, 2, 3 for partner 2, 3, 4


def estimate_shape_vector(tree, m: int, samples: int, rng):
    """Match fractions (and the multinomial draw counts) for every m-leaf
    target in canonical state order, from one batch of iid leaf m-tuples."""
    states = enumerate_cladograms(m)
    draws = rng.integers(1, tree.n + 1, size=(samples, m))
    distinct = np.ones(samples, dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            distinct &= draws[:, i] != draws[:, j]
    counts = np.zeros(len(states), dtype=np.int64)
    if m == 4:
        code_to_state = {_quartet_code_of_target(t): i for i, t in enumerate(states)}
        if distinct.any():
            d = draws[distinct]
            codes = tree.quartet_partners(d[:, 0], d[:, 1], d[:, 2], d[:, 3])
            for code in (1, 2, 3):
                counts[code_to_state[code]] = int((codes == code).sum())
    else:
        from alphaford.cladogram import shape

        index = {t.key: i for i, t in enumerate(states)}
        for row in draws[distinct]:
            counts[index[shape(tree, row.tolist()).key]] += 1
    return counts / samples, counts


def estimate_shape_polynomial(tree: FiniteMeasureTree, m: int, target: Cladogram, samples: int, rng):
    """Monte Carlo estimate of the probability that m iid uniform leaf draws
    (with replacement) span ``target``; tuples with repeats never match.
    Returns (estimate, standard error)."""
    if target.m != m:
        raise StructureError("target must be an m-cladogram")
    if m == 4:
        fractions, _ = estimate_shape_vector(tree, 4, samples, rng)
        states = enumerate_cladograms(4)
        i = next(i for i, s in enumerate(states) if s.key == target.key)
        p = float(fractions[i])
    else:
        from alphaford.cladogram import shape

        draws = rng.integers(1, tree.n + 1, size=(samples, m))
        hits = 0
        for row in draws:
            if len(set(row.tolist())) == m and shape(tree, row.tolist()).key == target.key:
                hits += 1
        p = hits / samples
    se = math.sqrt(max(p * (1.0 - p), 0.0) / samples)
    return p, se


@dataclass(frozen=True)
class DualityCheck:
    """Per-target comparison of the simulated chain expectation with the
    exact Feynman-Kac right-hand side."""

    target_key: tuple
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float

    @property
    def z_score(self) -> float:
        return (self.lhs - self.rhs) / math.sqrt(self.lhs_se**2 + self.rhs_se**2)


def verify_chain_diffusion_duality(
    alpha,
    m: int,
    n_leaves: int,
    t: float,
    replicates: int,
    seed: int = 0,
    tuples_per_replicate: int = 64,
    phi_samples: int = 200_000,
    initial: FiniteMeasureTree | None = None,
) -> list[DualityCheck]:
    """Compare E[Phi^{m,target}(X_t)] for the N-leaf chain started at a fixed
    tree against the dual expectation computed exactly on the m-cladogram
    backward chain tilted by the potential.

    Left side: ``replicates`` independent chain runs, each contributing a
    shape-polynomial estimate from ``tuples_per_replicate`` leaf m-tuples;
    the replicate spread yields the standard error.  Right side:
    exp(t (Q_bwd + diag beta)) applied to the vector of shape polynomials of
    the initial tree (estimated once from ``phi_samples`` tuples, with the
    multinomial covariance propagated through the matrix).
    """
    if m not in (4, 5):
        raise StructureError("the desk-scale duality check supports m = 4 or 5")
    alpha = parse_alpha(alpha)
    if initial is None:
        initial = sample_ford_tree(alpha, n_leaves, stream(seed, 0))
    states = enumerate_cladograms(m)

    # right-hand side
    phi0, counts = estimate_shape_vector(initial, m, phi_samples, stream(seed, 1))
    qb = backward_rate_matrix(alpha, m).to_dense()
    beta = np.array([float(b) for b in _beta_vector(alpha, m)])
    mat = matrix_exponential(qb + np.diag(beta), t)
    rhs = mat @ phi0
    cov_phi = (np.diag(phi0) - np.outer(phi0, phi0)) / phi_samples
    rhs_var = np.einsum("ij,jk,ik->i", mat, cov_phi, mat)

    # left-hand side
    sums = np.zeros(len(states))
    sq = np.zeros(len(states))
    for r in range(replicates):
        rng = stream(seed, 2, r)
        state = ChainState(initial, alpha, rng)
        state.run_until(t)
        est, _ = estimate_shape_vector(state.as_tree(), m, tuples_per_replicate, rng)
        sums += est
        sq += est * est
    lhs = sums / replicates
    lhs_var = (sq / replicates - lhs**2) / (replicates - 1)

    return [
        DualityCheck(
            target_key=states[i].key,
            lhs=float(lhs[i]),
            lhs_se=float(math.sqrt(max(lhs_var[i], 0.0))),
            rhs=float(rhs[i]),
            rhs_se=float(math.sqrt(max(rhs_var[i], 0.0))),
        )
        for i in range(len(states))
    ]
