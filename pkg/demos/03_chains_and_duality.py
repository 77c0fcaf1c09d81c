"""The forward and backward chains and their Feynman-Kac link.

A chain move displaces one leaf to a weighted-random edge.  The reversed
chain weighs the displaced leaf (cherry vs not) instead of the target edge,
and the two generators differ by the diagonal potential
beta(t) = (1 - 2 alpha)(#cherries (2m - 5) - m(m - 1)).  Consequently
exp(t Q_fwd) equals the transpose of exp(t (Q_bwd + diag beta)), and the
alpha-Ford law is stationary for the forward chain -- both checkable to
machine precision, the latter exactly in rationals.
"""

import numpy as np

from alphaford._rng import stream
from alphaford.chain import (
    ChainState,
    backward_rate_matrix,
    beta_potential,
    forward_rate_matrix,
    simulate_chain,
    verify_beta_is_rate_discrepancy,
    verify_feynman_kac,
    verify_invariance,
)
from alphaford.ford import sample_ford_tree

m = 5
for alpha in ("0", "1/4", "1/2", "1"):
    fwd = forward_rate_matrix(alpha, m)
    bwd = backward_rate_matrix(alpha, m)
    beta = beta_potential(alpha, m)
    print(
        f"alpha={alpha:>3}: total forward rate {fwd.total_rate(0)},"
        f" backward rates span {min(bwd.total_rate(s) for s in range(15))}"
        f"..{max(bwd.total_rate(s) for s in range(15))},"
        f" beta span {min(beta.values())}..{max(beta.values())}"
    )
    assert verify_beta_is_rate_discrepancy(alpha, m)
    print(f"   stationarity residual (exact): {verify_invariance(alpha, m)}")
    for t in (0.1, 1.0):
        print(f"   Feynman-Kac deviation at t={t}: {verify_feynman_kac(alpha, m, t):.2e}")

print("\nsymmetry holds exactly at alpha = 1/2:")
q = forward_rate_matrix("1/2", m).to_dense()
print("  max |Q - Q^T| =", np.abs(q - q.T).max())

print("\nevent-driven run on 60 leaves, observing the jump counter:")
state = ChainState(sample_ford_tree("1/2", 60, stream(1)), "1/2", stream(2))
summary = simulate_chain(
    state, horizon=1.0, observe_times=[0.25, 0.5, 0.75], observers=[lambda s: s.jumps]
)
for t, (jumps,) in summary["observations"]:
    print(f"  t={t:4.2f}: {jumps} jumps (rate {state.total_rate:.0f}/unit time)")
