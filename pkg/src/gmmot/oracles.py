"""Reference solvers used to cross-check the fast paths.

These are deliberately naive: they share no code with the solvers they
check.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def brute_force_transport(a, b, cost) -> tuple[float, np.ndarray]:
    """Minimum transport cost by enumerating every basic feasible solution.

    A basis is any choice of ``n + m - 1`` cells whose equality system (one
    redundant column constraint dropped) is nonsingular. Each basis is solved
    directly and kept if its flows are nonnegative. Intended for ``n, m <= 4``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    size = n + m - 1
    cells = [(i, j) for i in range(n) for j in range(m)]
    subsets = np.array(list(combinations(range(n * m), size)))
    # constraint matrix rows: n row sums then the first m - 1 column sums
    full = np.zeros((size, n * m))
    for idx, (i, j) in enumerate(cells):
        full[i, idx] = 1.0
        if j < m - 1:
            full[n + j, idx] = 1.0
    rhs = np.concatenate([a, b[: m - 1]])
    mats = full[:, subsets].transpose(1, 0, 2)
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 0.5
    sols = np.linalg.solve(mats[ok], np.broadcast_to(rhs, (int(ok.sum()), size))[..., None])[..., 0]
    feasible = np.all(sols >= -1e-12, axis=1)
    flat_cost = cost.reshape(-1)
    values = np.einsum("ks,ks->k", sols[feasible], flat_cost[subsets[ok][feasible]])
    best = int(np.argmin(values))
    plan = np.zeros(n * m)
    plan[subsets[ok][feasible][best]] = sols[feasible][best]
    return float(values[best]), plan.reshape(n, m)


def quantile_w2_gaussian_1d(m1: float, s1: float, m2: float, s2: float) -> float:
    """1-D Gaussian W2 by adaptive quadrature of the quantile-function integral."""
    from scipy.integrate import quad
    from scipy.stats import norm

    value, _ = quad(lambda t: ((m1 + s1 * norm.ppf(t)) - (m2 + s2 * norm.ppf(t))) ** 2,
                    0.0, 1.0, limit=200, epsabs=1e-14, epsrel=1e-12)
    return float(np.sqrt(value))
