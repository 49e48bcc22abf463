"""Independent oracles for cross-checking the production solver.

The shooting oracle integrates with scipy's DOP853 (order 8, a different
integrator family from the production Dormand-Prince 5(4) kernel) at 10x
tighter tolerances and bisects the crossing count by brute force.  It never
touches fieldlab's integration code path.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp


def oracle_crossings(f, F, n_dim, s, rmax=60.0, rtol=1e-11, atol=1e-13):
    """Zero-crossing count of the radial trajectory from height s."""
    r0 = 1e-8 * (1 + abs(s))
    fs = float(f(s))
    v0 = s - fs * r0 ** 2 / (2 * n_dim)
    w0 = -fs * r0 / n_dim

    def rhs(r, y):
        return [y[1], -(n_dim - 1) / r * y[1] - float(f(y[0]))]

    def energy_negative(r, y):
        return 0.5 * y[1] ** 2 + float(F(y[0])) + 1e-14

    energy_negative.terminal = True
    energy_negative.direction = -1

    sol = solve_ivp(rhs, (r0, rmax), [v0, w0], method="DOP853",
                    rtol=rtol, atol=atol, events=energy_negative)
    v = sol.y[0]
    return int(np.sum(np.sign(v[1:]) * np.sign(v[:-1]) < 0))


def oracle_height(f, F, n_dim, nodes, s_lo, s_hi, tol=1e-13):
    """Brute-force bisection of the shoot height for a state with the
    given node count; bracket must straddle the crossing-count jump."""
    k_lo = oracle_crossings(f, F, n_dim, s_lo)
    k_hi = oracle_crossings(f, F, n_dim, s_hi)
    assert k_lo <= nodes < k_hi, (k_lo, k_hi)
    while s_hi - s_lo > tol * (1 + s_hi):
        mid = 0.5 * (s_lo + s_hi)
        if oracle_crossings(f, F, n_dim, mid) >= nodes + 1:
            s_hi = mid
        else:
            s_lo = mid
    return 0.5 * (s_lo + s_hi)
