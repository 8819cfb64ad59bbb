"""Slow, independent reference implementations used only by the tests."""

import math

import numpy as np


def eta(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(s[inside] ** 2 / (s[inside] ** 2 - 1.0))
    return out


def payoff(x, k1, cap, P, Pg, new):
    """Normalized seller payoff (demand = 1), vectorized over ``x``."""
    x = np.asarray(x, dtype=float)
    val = x * P * eta(k1 + x)
    if new:
        val = val + Pg * (cap - x)
    return val


def grid_best_response(k1, cap, P, Pg, new, step=1e-4):
    grid = np.append(np.arange(0.0, cap, step), cap)
    vals = payoff(grid, k1, cap, P, Pg, new)
    return float(grid[int(np.argmax(vals))])


def grid_fixed_point(caps, P, Pg, news, step=1e-4, rounds=500):
    """Gauss-Seidel sweeps of grid best responses from the zero profile."""
    x = np.zeros(len(caps))
    for _ in range(rounds):
        prev = x.copy()
        for i in range(len(caps)):
            x[i] = grid_best_response(x.sum() - x[i], caps[i], P, Pg, news[i], step)
        if np.max(np.abs(x - prev)) <= step / 2:
            break
    return x


def max_grid_improvement(x, caps, P, Pg, news, step=1e-4):
    """Largest payoff gain any seller can get by a unilateral move on the grid."""
    worst = 0.0
    for i in range(len(caps)):
        k1 = x.sum() - x[i]
        grid = np.append(np.arange(0.0, caps[i], step), caps[i])
        best = payoff(grid, k1, caps[i], P, Pg, news[i]).max()
        here = float(payoff(np.array([x[i]]), k1, caps[i], P, Pg, news[i])[0])
        worst = max(worst, best - here)
    return worst


def bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def ec4p_single_seller(ratio):
    """Root of the price-support first-order condition for one seller, no rivals."""

    def g(x):
        w = x * x - 1.0
        return math.exp(x * x / w) * (1.0 - 2.0 * x * x / (w * w)) - ratio

    return bisect(g, 0.0, math.sqrt(2.0 - math.sqrt(3.0)))
