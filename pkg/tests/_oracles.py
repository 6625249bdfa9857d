"""Independent reference computations shared by several test modules."""

import numpy as np

from optislip.vehicle import SimState, qcm_derivatives


def fd_slip_rate(v, omega, vp, surface, Tw, h=1e-6):
    """Slip rate by finite differences along the wheel/vehicle equations.

    Integrates the two-state model forward and backward by ``h`` with a
    classical RK4 step built on ``qcm_derivatives`` alone, then
    differentiates the slip definition numerically.
    """

    def rk4(v, w, dt):
        def f(v, w):
            return qcm_derivatives(SimState(0.0, v, w), vp, surface, Tw)

        a1, c1 = f(v, w)
        a2, c2 = f(v + dt / 2 * a1, w + dt / 2 * c1)
        a3, c3 = f(v + dt / 2 * a2, w + dt / 2 * c2)
        a4, c4 = f(v + dt * a3, w + dt * c3)
        return v + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4), w + dt / 6 * (c1 + 2 * c2 + 2 * c3 + c4)

    def slip_after(dt):
        v1, w1 = rk4(v, omega, dt)
        return 1 - vp.radius * w1 / v1

    # five-point stencil, fourth order in h
    return (8 * (slip_after(h) - slip_after(-h)) - (slip_after(2 * h) - slip_after(-2 * h))) / (12 * h)


def interior_sample(log, n=100, seed=0):
    """Indices of ``n`` logged steps with slip strictly inside (0, 1) and no lock in the next step."""
    lam = log.lam
    ok = (lam > 1e-6) & (lam < 0.999) & (log.omega > 0)
    ok[-1] = False
    ok[:-1] &= log.omega[1:] > 0
    idx = np.flatnonzero(ok)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(idx, size=min(n, idx.size), replace=False))


def grid_argmax(values_fn, n=1000):
    grid = np.linspace(0.0, 1.0, n)
    vals = values_fn(grid)
    return grid[int(np.argmax(vals))]
