"""Numerical checks of the identities and per-step inequalities behind the regret
bounds.  Each check returns a :class:`CheckResult`; none of them raises on a
violation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostSequence
from .geometry import FeasibleSet
from .omd import Trajectory
from .regularizers import Regularizer

STEP_TOL = 1e-8
IDENTITY_RTOL = 1e-9
U_PER_STEP = 100


@dataclass(frozen=True)
class CheckResult:
    name: str
    subject: str
    checked: int
    failed: int
    worst: float      # largest violation (or relative error) observed
    tol: float

    @property
    def passed(self) -> bool:
        return self.failed == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name:<18} {self.subject:<14} {self.checked - self.failed}/{self.checked}"
                f"  worst={self.worst:.3e} tol={self.tol:g}")


def _result(name, subject, excess, tol) -> CheckResult:
    excess = np.asarray(excess, dtype=np.float64).ravel()
    worst = float(excess.max()) if excess.size else 0.0
    return CheckResult(name, subject, int(excess.size), int(np.sum(excess > tol)), worst, tol)


def three_point_identity(r: Regularizer, X, Y, Z, tol: float = IDENTITY_RTOL) -> CheckResult:
    """``<grad r(z) - grad r(y), x - y> = D(x,y) - D(x,z) + D(y,z)`` row by row.

    The error is relative to ``max(1, |D(x,y)| + |D(x,z)| + |D(y,z)|)``, the
    magnitude of the terms being combined.
    """
    lhs = np.sum((r.gradient(Z) - r.gradient(Y)) * (X - Y), axis=-1)
    dxy, dxz, dyz = r.bregman(X, Y), r.bregman(X, Z), r.bregman(Y, Z)
    rhs = dxy - dxz + dyz
    scale = np.maximum(1.0, np.abs(dxy) + np.abs(dxz) + np.abs(dyz))
    return _result("three-point", r.name, np.abs(lhs - rhs) / scale, tol)


def _subject(traj: Trajectory, r: Regularizer) -> str:
    name = traj.regularizer.name
    return name if name == r.name else f"{name}({r.name})"


def _u_samples(fset: FeasibleSet, seed, t: int, n: int):
    return fset.sample(n, np.random.default_rng([seed, t]))


def optimality_residual(traj: Trajectory, fset: FeasibleSet, n_u: int = U_PER_STEP,
                        seed: int = 0, tol: float = STEP_TOL) -> CheckResult:
    """For every step ``x+ = argmin <eta g, z> + D(z, x)`` and sampled ``u``:
    ``<x+ - u, eta g> <= D(u, x) - D(u, x+) - D(x+, x)``."""
    r = traj.regularizer.effective(fset)
    excess = []
    for t in range(1, traj.T + 1):
        x, xn, g = traj.points[t - 1], traj.points[t], traj.gradients[t - 1]
        U = _u_samples(fset, seed, t, n_u)
        lhs = traj.eta * ((xn - U) @ g)
        rhs = r.bregman(U, x) - r.bregman(U, xn) - r.bregman(xn, x)
        excess.append(lhs - rhs)
    return _result("optimality", _subject(traj, r), np.concatenate(excess), tol)


def descent_inequality(traj: Trajectory, c: CostSequence, fset: FeasibleSet,
                       n_u: int = U_PER_STEP, seed: int = 0, tol: float = STEP_TOL) -> CheckResult:
    """``eta (f_t(x_{t+1}) - f_t(u)) <= D(u, x_t) - D(u, x_{t+1})`` for sampled ``u``.

    Holds when ``eta <= 1/beta`` for a valid relative-smoothness constant.
    """
    r = traj.regularizer.effective(fset)
    excess = []
    for t in range(1, traj.T + 1):
        x, xn = traj.points[t - 1], traj.points[t]
        U = _u_samples(fset, seed, t, n_u)
        lhs = traj.eta * (c.value(t, xn) - c.value(t, U))
        rhs = r.bregman(U, x) - r.bregman(U, xn)
        excess.append(lhs - rhs)
    return _result("descent", _subject(traj, r), np.concatenate(excess), tol)


def bregman_lipschitz(traj: Trajectory, U, gamma: float, fset: FeasibleSet,
                      tol: float = STEP_TOL) -> CheckResult:
    """``|D(u_{t+1}, x_{t+1}) - D(u_t, x_{t+1})| <= gamma ||u_{t+1} - u_t||`` over the run."""
    r = traj.regularizer.effective(fset)
    U = np.asarray(U, dtype=np.float64)
    if U.shape[0] < 2:
        return _result("bregman-lipschitz", _subject(traj, r), [], tol)
    X = traj.points[1:U.shape[0]]
    gap = np.abs(r.bregman(U[1:], X) - r.bregman(U[:-1], X))
    dist = np.linalg.norm(np.diff(U, axis=0), ord=r.primal_norm.order, axis=1)
    return _result("bregman-lipschitz", _subject(traj, r), gap - gamma * dist, tol)


def telescoping(traj: Trajectory, U, fset: FeasibleSet, tol: float = STEP_TOL) -> CheckResult:
    """``sum_t D(u_t,x_t) - D(u_t,x_{t+1})`` directly and in re-indexed form.

    The re-indexed form is ``D(u_1,x_1) - D(u_{T+1},x_{T+1}) + sum_t [D(u_{t+1},x_{t+1})
    - D(u_t,x_{t+1})]`` with ``u_{T+1} = u_T``.  The difference is scaled by
    ``max(1, largest term)``.
    """
    r = traj.regularizer.effective(fset)
    U = np.asarray(U, dtype=np.float64)
    T = U.shape[0]
    Ux = np.vstack([U, U[-1:]])
    X = traj.points[:T + 1]
    a = r.bregman(Ux[:T], X[:T])            # D(u_t, x_t)
    b = r.bregman(Ux[:T], X[1:])            # D(u_t, x_{t+1})
    cc = r.bregman(Ux[1:], X[1:])           # D(u_{t+1}, x_{t+1})
    direct = math.fsum((a - b).tolist())
    reindexed = math.fsum([float(a[0]), -float(cc[-1]), *(cc - b).tolist()])
    scale = max(1.0, float(np.max(np.abs(np.concatenate([a, b, cc])))))
    return _result("telescoping", _subject(traj, r), [abs(direct - reindexed) / scale], tol)
