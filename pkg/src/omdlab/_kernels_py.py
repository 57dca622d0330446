"""Pure-NumPy implementations of the per-step solver kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for loop.
Each function takes float64 1-d arrays and returns fresh arrays.
"""

import numpy as np

from .errors import SolverError


def project_capped_simplex(y, eps):
    """Euclidean projection of ``y`` onto ``{sum(x) = 1, x >= eps}``."""
    y = np.asarray(y, dtype=np.float64)
    d = y.shape[0]
    radius = 1.0 - d * eps
    z = y - eps
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - radius
    k = np.arange(1, d + 1)
    cond = u - css / k > 0
    rho = np.nonzero(cond)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(z - theta, 0.0) + eps


def entropy_simplex_step(x, g, eta, eps):
    """Minimize ``<eta g, z> + KL(z, x)`` over ``{sum(z) = 1, z >= eps}``.

    The solution is ``z_i = max(eps, x_i exp(-eta g_i - nu))``; returns ``(z, nu)``.
    """
    logw = np.log(x) - eta * np.asarray(g, dtype=np.float64)
    top = logw.max()
    w = np.exp(logw - top)
    d = w.shape[0]
    order = np.argsort(-w, kind="stable")
    ws = w[order]
    csum = np.cumsum(ws)
    c = 1.0
    for k in range(1, d + 1):
        c = (1.0 - (d - k) * eps) / csum[k - 1]
        if c * ws[k - 1] >= eps and (k == d or c * ws[k] <= eps):
            break
    z = np.maximum(eps, c * w)
    return z, float(top - np.log(c))


def burg_simplex_step(x, g, eta, eps, max_iters=200, tol=1e-12):
    """Minimize ``<eta g, z> + D_burg(z, x)`` over ``{sum(z) = 1, z >= eps}``.

    Stationarity gives ``z_i(nu) = max(eps, 1 / (1/x_i + eta g_i + nu))``; the scalar
    ``nu`` is found by bisection on the decreasing map ``nu -> sum z(nu)``.
    Returns ``(z, nu, iterations)``.
    """
    a = 1.0 / np.asarray(x, dtype=np.float64) + eta * np.asarray(g, dtype=np.float64)
    d = a.shape[0]
    if d == 1:
        return np.ones(1), float(1.0 - a[0]), 0
    amin = a.min()
    # at lo the largest coordinate alone is 1; at hi every free coordinate is <= 1/(2d)
    lo = -amin + 1.0
    hi = -amin + 2.0 * d
    it = 0
    mid = lo
    total = np.inf
    while it < max_iters:
        it += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        total = np.maximum(eps, 1.0 / (a + mid)).sum()
        if total > 1.0:
            lo = mid
        elif total < 1.0:
            hi = mid
        else:
            break
    z = np.maximum(eps, 1.0 / (a + mid))
    resid = abs(z.sum() - 1.0)
    if resid > tol:
        raise SolverError(
            "Burg simplex bisection did not converge",
            diagnostics={"iterations": it, "residual": resid, "bracket": (lo, hi)},
        )
    return z, float(mid), it


def l1sq_box_step(x, g, eta, lower, upper):
    """Minimize ``<eta g, z> + (sum(z) - sum(x))^2 / 2`` over the box.

    For a fixed total ``s`` the linear part is a fractional knapsack filled in
    increasing order of ``g``; the scalar ``s`` is then located exactly on the
    piecewise-linear subgradient map.  Returns ``(z, s)``.
    """
    g = np.asarray(g, dtype=np.float64)
    S = float(np.sum(x))
    order = np.argsort(g, kind="stable")
    widths = (upper - lower)[order]
    base = float(np.sum(lower))
    s = float(np.sum(upper))
    B = base
    for k in range(g.shape[0]):
        cand = S - eta * g[order[k]]
        if cand <= B:
            s = B
            break
        if cand < B + widths[k]:
            s = cand
            break
        B += widths[k]
    z = np.array(lower, dtype=np.float64, copy=True)
    remaining = s - base
    for k in range(g.shape[0]):
        i = order[k]
        take = min(widths[k], remaining)
        if take <= 0:
            break
        z[i] += take
        remaining -= take
    return z, s
