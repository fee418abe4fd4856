"""Entropic transport solvers on small problems with known answers.

Run with ``python demos/ot_solvers.py``. Each block prints the solver output
next to a value obtained by other means, so the numbers can be checked by eye.
"""

import itertools

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from fgwcluster.ot import Marginals, OTConfig, entropic_fgw, entropic_gw, gw_objective, sinkhorn

rng = np.random.default_rng(0)

# Sinkhorn against the linear program. As epsilon shrinks the entropic cost
# approaches the unregularized optimum from above.
n, s = 6, 4
cost = rng.uniform(0, 1, (n, s))
marg = Marginals.uniform(n, s)
A_eq = np.vstack([np.kron(np.eye(n), np.ones(s)), np.kron(np.ones(n), np.eye(s))])
lp = linprog(cost.ravel(), A_eq=A_eq, b_eq=np.concatenate([marg.mu, marg.nu]), bounds=(0, None))
print(f"LP optimum            {lp.fun:.6f}")
for eps in (0.5, 0.1, 0.02, 0.005):
    c = sinkhorn(cost, marg, OTConfig(epsilon=eps, sinkhorn_max_iter=20000))
    print(f"sinkhorn eps={eps:<6} {float((c.pi * cost).sum()):.6f}  residual {c.residual:.1e}  iters {c.n_iter}")

# Gromov-Wasserstein between a graph and a relabeled copy of itself. The graph
# has no symmetries: for a symmetric graph such as a path the uniform starting
# plan is already stationary and the iteration cannot pick a mirror image.
edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 4), (3, 5)]
m = 6
A0 = np.zeros((m, m))
for u, v in edges:
    A0[u, v] = A0[v, u] = 1.0
cfg = OTConfig(epsilon=0.005, outer_max_iter=200)
print()
for trial in range(10):
    perm = rng.permutation(m)
    shuffled = A0[np.ix_(perm, perm)]
    c = entropic_gw(sp.csr_matrix(A0), shuffled, Marginals.uniform(m, m), cfg)
    hit = c.pi.argmax(1).tolist() == np.argsort(perm).tolist()
    print(f"relabeling {trial}: GW objective {gw_objective(A0, shuffled, c.pi):.2e}  recovered permutation {hit}")
# The problem is non-convex: every zero-cost plan is a permutation, but the
# linearized iteration can settle in a local minimum with positive cost.

# Fused problem: alpha interpolates between the feature-only and the
# structure-only couplings, and the endpoints coincide with the pure solvers.
# B is invariant under swapping its two nodes, so at alpha=1 the plan stays
# uniform for the same reason as above.
A = sp.csr_matrix(np.array([[0, 1, 1, 0], [1, 0, 1, 0], [1, 1, 0, 1], [0, 0, 1, 0]], dtype=float))
B = np.array([[1.0, 0.2], [0.2, 1.0]])
M = rng.uniform(0, 1, (4, 2))
marg = Marginals.uniform(4, 2)
cfg = OTConfig(epsilon=0.05)
print()
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    pi = entropic_fgw(M, A, B, marg, cfg.with_alpha(alpha)).pi
    print(f"alpha={alpha:<4} row argmax {pi.argmax(1).tolist()}  mass on column 0 {pi[:, 0].round(3).tolist()}")
same0 = entropic_fgw(M, A, B, marg, cfg.with_alpha(0.0)).pi.tobytes() == sinkhorn(M, marg, cfg).pi.tobytes()
same1 = entropic_fgw(M, A, B, marg, cfg.with_alpha(1.0)).pi.tobytes() == entropic_gw(A, B, marg, cfg).pi.tobytes()
print(f"alpha=0 equals sinkhorn bitwise: {same0}; alpha=1 equals GW bitwise: {same1}")
