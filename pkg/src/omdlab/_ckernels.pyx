# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the solver kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs

from .errors import SolverError

cnp.import_array()


def project_capped_simplex(const double[::1] y, double eps):
    cdef Py_ssize_t d = y.shape[0], k, rho = 0
    cdef double radius = 1.0 - d * eps
    cdef double css = 0.0, theta = 0.0, rho_css = 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.sort(np.asarray(y) - eps)
    cdef double[::1] uv = u
    for k in range(d):
        css += uv[d - 1 - k]
        if uv[d - 1 - k] - (css - radius) / (k + 1) > 0:
            rho = k
            rho_css = css
    theta = (rho_css - radius) / (rho + 1)
    out = np.empty(d)
    cdef double[::1] o = out
    cdef double v
    for k in range(d):
        v = y[k] - eps - theta
        o[k] = (v if v > 0 else 0.0) + eps
    return out


def entropy_simplex_step(const double[::1] x, const double[::1] g, double eta, double eps):
    cdef Py_ssize_t d = x.shape[0], k
    cdef double top = -1e308, c = 1.0, csum = 0.0, v
    logw_arr = np.empty(d)
    cdef double[::1] logw = logw_arr
    for k in range(d):
        logw[k] = log(x[k]) - eta * g[k]
        if logw[k] > top:
            top = logw[k]
    w_arr = np.empty(d)
    cdef double[::1] w = w_arr
    for k in range(d):
        w[k] = exp(logw[k] - top)
    cdef long[::1] order = np.argsort(-w_arr, kind="stable").astype(np.int_)
    for k in range(1, d + 1):
        csum += w[order[k - 1]]
        c = (1.0 - (d - k) * eps) / csum
        if c * w[order[k - 1]] >= eps and (k == d or c * w[order[k]] <= eps):
            break
    z = np.empty(d)
    cdef double[::1] zv = z
    for k in range(d):
        v = c * w[k]
        zv[k] = v if v > eps else eps
    return z, float(top - log(c))


def burg_simplex_step(const double[::1] x, const double[::1] g, double eta, double eps,
                      int max_iters=200, double tol=1e-12):
    cdef Py_ssize_t d = x.shape[0], k
    cdef double amin = 1e308, lo, hi, mid, total, v
    cdef int it = 0
    a_arr = np.empty(d)
    cdef double[::1] a = a_arr
    for k in range(d):
        a[k] = 1.0 / x[k] + eta * g[k]
        if a[k] < amin:
            amin = a[k]
    if d == 1:
        return np.ones(1), float(1.0 - a[0]), 0
    lo = -amin + 1.0
    hi = -amin + 2.0 * d
    mid = lo
    while it < max_iters:
        it += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        total = 0.0
        for k in range(d):
            v = 1.0 / (a[k] + mid)
            total += v if v > eps else eps
        if total > 1.0:
            lo = mid
        elif total < 1.0:
            hi = mid
        else:
            break
    z = np.empty(d)
    cdef double[::1] zv = z
    total = 0.0
    for k in range(d):
        v = 1.0 / (a[k] + mid)
        zv[k] = v if v > eps else eps
        total += zv[k]
    if fabs(total - 1.0) > tol:
        raise SolverError(
            "Burg simplex bisection did not converge",
            diagnostics={"iterations": it, "residual": fabs(total - 1.0), "bracket": (lo, hi)},
        )
    return z, float(mid), it


def l1sq_box_step(const double[::1] x, const double[::1] g, double eta, const double[::1] lower, const double[::1] upper):
    cdef Py_ssize_t d = x.shape[0], k, i
    cdef double S = 0.0, base = 0.0, s = 0.0, B, cand, width, remaining, take
    for k in range(d):
        S += x[k]
        base += lower[k]
        s += upper[k]
    cdef long[::1] order = np.argsort(np.asarray(g), kind="stable").astype(np.int_)
    B = base
    for k in range(d):
        i = order[k]
        width = upper[i] - lower[i]
        cand = S - eta * g[i]
        if cand <= B:
            s = B
            break
        if cand < B + width:
            s = cand
            break
        B += width
    z = np.array(lower, dtype=np.float64, copy=True)
    cdef double[::1] zv = z
    remaining = s - base
    for k in range(d):
        i = order[k]
        width = upper[i] - lower[i]
        take = width if width < remaining else remaining
        if take <= 0:
            break
        zv[i] += take
        remaining -= take
    return z, s
