"""Online mirror descent: the per-(regularizer, set) argmin solvers, the online loop
and the offline comparator oracle."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .costs import CostKind, CostSequence
from .errors import ConvergenceWarning, InputError, OmdLabError, SolverError
from .geometry import FEASIBILITY_TOL, FeasibleSet, PositiveBox, TruncatedSimplex, as_point
from .regularizers import RegKind, Regularizer

MAX_BISECTION_ITERS = 200
BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class StepRecord:
    iterations: int = 0
    multiplier: float = float("nan")


def mirror_step_info(g, x, eta: float, r: Regularizer, fset: FeasibleSet,
                     max_bisection_iters: int = MAX_BISECTION_ITERS,
                     bisection_tol: float = BISECTION_TOL) -> tuple[np.ndarray, StepRecord]:
    """``argmin_{z in set} <g, z> + D_r(z, x) / eta`` together with solver diagnostics."""
    x = as_point(x, fset.dim)
    g = as_point(g, fset.dim)
    if not eta > 0:
        raise InputError("eta must be positive")
    if not fset.contains(x, FEASIBILITY_TOL):
        raise InputError("current point is not feasible")
    if r.dim != fset.dim:
        raise InputError("regularizer and set dimensions differ")
    geo = r.effective(fset)
    k = geo.kind
    if isinstance(fset, TruncatedSimplex):
        eps = fset.epsilon
        if k is RegKind.EUCLIDEAN:
            return kernels.project_capped_simplex(x - eta * g, eps), StepRecord()
        if k is RegKind.NEG_ENTROPY:
            z, nu = kernels.entropy_simplex_step(x, g, eta, eps)
            return z, StepRecord(0, nu)
        if k is RegKind.BURG:
            z, nu, it = kernels.burg_simplex_step(x, g, eta, eps, max_bisection_iters, bisection_tol)
            return z, StepRecord(it, nu)
    elif isinstance(fset, PositiveBox):
        lo, hi = fset.lower, fset.upper
        if k is RegKind.EUCLIDEAN:
            return np.clip(x - eta * g, lo, hi), StepRecord()
        if k is RegKind.NEG_ENTROPY:
            with np.errstate(over="ignore"):
                return np.clip(x * np.exp(-eta * g), lo, hi), StepRecord()
        if k is RegKind.BURG:
            den = 1.0 / x + eta * g
            with np.errstate(divide="ignore"):
                z = np.where(den > 0, np.clip(1.0 / np.where(den > 0, den, 1.0), lo, hi), hi)
            return z, StepRecord()
        if k is RegKind.L1_SQUARED:
            if not np.any(g):
                return x.copy(), StepRecord()
            z, s = kernels.l1sq_box_step(x, g, eta, lo, hi)
            return z, StepRecord(0, s)
    raise InputError(f"no solver for {r.name} on {type(fset).__name__}")


def mirror_step(g, x, eta: float, r: Regularizer, fset: FeasibleSet, **kw) -> np.ndarray:
    return mirror_step_info(g, x, eta, r, fset, **kw)[0]


def step_objective(z, g, x, eta, r: Regularizer, fset: FeasibleSet):
    """The objective minimized by the mirror step (in the solver's effective geometry)."""
    geo = r.effective(fset)
    return np.asarray(z) @ np.asarray(g) + geo.bregman(z, x) / eta


# -- online loop -------------------------------------------------------------------


@dataclass(frozen=True)
class OmdConfig:
    eta: float
    regularizer: Regularizer
    fset: FeasibleSet
    x1: np.ndarray | None = None
    max_bisection_iters: int = MAX_BISECTION_ITERS
    bisection_tol: float = BISECTION_TOL

    def __post_init__(self):
        if not self.eta > 0:
            raise InputError("eta must be positive")
        if self.bisection_tol <= 0 or self.max_bisection_iters < 1:
            raise InputError("bisection_tol must be > 0 and max_bisection_iters >= 1")
        x1 = self.fset.center() if self.x1 is None else as_point(self.x1, self.fset.dim)
        if not self.fset.contains(x1, FEASIBILITY_TOL):
            raise InputError("x1 must be feasible")
        object.__setattr__(self, "x1", x1)


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray        # (T+1, d): x_1 .. x_{T+1}
    gradients: np.ndarray     # (T, d): grad f_t(x_t)
    costs: np.ndarray         # (T,): f_t(x_t)
    iterations: np.ndarray    # (T,)
    multipliers: np.ndarray   # (T,)
    eta: float
    regularizer: Regularizer = field(repr=False)

    @property
    def T(self) -> int:
        return self.costs.shape[0]

    def x(self, t: int) -> np.ndarray:
        return self.points[t - 1]


def run_omd(c: CostSequence, cfg: OmdConfig) -> Trajectory:
    """``x_{t+1} = mirror_step(grad f_t(x_t), x_t)`` for ``t = 1..T``."""
    if cfg.fset.dim != c.dim or cfg.regularizer.dim != c.dim:
        raise InputError("configuration and cost dimensions differ")
    T, d = c.T, c.dim
    X = np.empty((T + 1, d))
    G = np.empty((T, d))
    F = np.empty(T)
    its = np.zeros(T, dtype=np.int64)
    mult = np.full(T, np.nan)
    X[0] = cfg.x1
    for t in range(1, T + 1):
        x = X[t - 1]
        try:
            F[t - 1] = c.value(t, x)
            G[t - 1] = c.gradient(t, x)
            X[t], rec = mirror_step_info(G[t - 1], x, cfg.eta, cfg.regularizer, cfg.fset,
                                         cfg.max_bisection_iters, cfg.bisection_tol)
        except SolverError as exc:
            raise SolverError(str(exc), round_index=t, diagnostics=exc.diagnostics) from exc
        except OmdLabError as exc:
            raise type(exc)(f"round {t}: {exc}") from exc
        its[t - 1], mult[t - 1] = rec.iterations, rec.multiplier
    return Trajectory(X, G, F, its, mult, cfg.eta, cfg.regularizer)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns ``t, x_1..x_d, cost, step_iterations, multiplier``; the final row holds
    ``x_{T+1}`` with empty cost fields."""
    d = traj.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"x_{i + 1}" for i in range(d)), "cost", "step_iterations", "multiplier"])
        for t in range(traj.T):
            w.writerow([t + 1, *traj.points[t].tolist(), float(traj.costs[t]),
                        int(traj.iterations[t]), float(traj.multipliers[t])])
        w.writerow([traj.T + 1, *traj.points[-1].tolist(), "", "", ""])


# -- offline comparator oracle ---------------------------------------------------------


@dataclass(frozen=True)
class OfflineResult:
    point: np.ndarray
    converged: bool
    iterations: int


def _iterate(grad: Callable, x0, eta, r, fset, tol, max_iters) -> OfflineResult:
    x = np.array(x0, dtype=np.float64)
    for k in range(1, max_iters + 1):
        z = mirror_step(grad(x), x, eta, r, fset)
        moved = float(np.linalg.norm(z - x))
        x = z
        if moved <= tol:
            return OfflineResult(x, True, k)
    return OfflineResult(x, False, max_iters)


def offline_minimizer(c: CostSequence, t: int, r: Regularizer, fset: FeasibleSet, eta: float,
                      tol: float = 1e-9, max_iters: int = 1000, x0=None,
                      return_info: bool = False):
    """Minimize the single function ``f_t`` by repeated mirror steps with step ``eta``.

    Warns with :class:`ConvergenceWarning` and returns the last iterate when
    ``max_iters`` is reached first.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    x0 = fset.center() if x0 is None else x0
    res = _iterate(lambda x: c.gradient(t, x), x0, eta, r, fset, tol, max_iters)
    if not res.converged:
        warnings.warn(f"offline minimizer for round {t} stopped after {max_iters} iterations",
                      ConvergenceWarning, stacklevel=2)
    return res if return_info else res.point


def mean_gradient(c: CostSequence, x) -> np.ndarray:
    """Gradient of ``(1/T) sum_t f_t`` at ``x``."""
    if c.kind is CostKind.DOPTIMAL:
        idx, counts = np.unique(c.data["index"], return_counts=True)
        pool = CostSequence.doptimal(c.data["pool"])
        grads = np.array([pool.gradient(int(i) + 1, x) for i in idx])
        return counts @ grads / c.T
    if c.kind is CostKind.POISSON:
        A, b = c.data["A"], c.data["b"]
        Ax = np.einsum("tmd,d->tm", A, x)
        return np.einsum("tm,tmd->d", 1.0 - b / Ax, A) / c.T
    return c.scales * (x - c.data["centers"].mean(axis=0))


def comparator_sequence(c: CostSequence, mode: str, r: Regularizer | None = None,
                        fset: FeasibleSet | None = None, eta: float | None = None,
                        tol: float = 1e-9, max_iters: int = 1000, path=None) -> np.ndarray:
    """Comparators ``u_1..u_T`` as a ``(T, d)`` array.

    ``per_round_min`` minimizes each distinct ``f_t`` from the set's center (identical
    rounds share one solve); ``fixed_hindsight`` minimizes ``sum_t f_t`` and
    repeats it; ``from_file`` loads a CSV written by :func:`write_comparators`.
    """
    if mode == "from_file":
        U = read_comparators(path, c.dim)
        if U.shape[0] != c.T:
            raise InputError(f"comparator file has {U.shape[0]} rounds, expected {c.T}")
        if fset is not None:
            for t in range(c.T):
                if not fset.contains(U[t], FEASIBILITY_TOL):
                    raise InputError(f"comparator for round {t + 1} is infeasible")
        return U
    if r is None or fset is None or eta is None:
        raise InputError(f"mode {mode!r} needs a regularizer, a set and a step size")
    if mode == "fixed_hindsight":
        res = _iterate(lambda x: mean_gradient(c, x), fset.center(), eta, r, fset, tol, max_iters)
        if not res.converged:
            warnings.warn("fixed-hindsight minimizer hit max_iters", ConvergenceWarning, stacklevel=2)
        return np.tile(res.point, (c.T, 1))
    if mode != "per_round_min":
        raise InputError(f"unknown comparator mode {mode!r}")
    keys = [c.group_key(t) for t in range(1, c.T + 1)]
    first = {}
    for t, key in enumerate(keys, start=1):
        first.setdefault(key, t)
    rounds = np.array(list(first.values()))
    if _batchable(c, r, fset):
        pts, done = _iterate_rounds(c, rounds, eta, r, fset, tol, max_iters)
    else:
        pts, done = np.empty((rounds.size, c.dim)), np.zeros(rounds.size, dtype=bool)
        for i, t in enumerate(rounds):
            res = _iterate(lambda x, t=int(t): c.gradient(t, x), fset.center(), eta, r, fset,
                           tol, max_iters)
            pts[i], done[i] = res.point, res.converged
    if not np.all(done):
        bad = rounds[~done]
        warnings.warn(f"per-round minimizer hit max_iters in {bad.size} rounds "
                      f"(first: {int(bad[0])})", ConvergenceWarning, stacklevel=2)
    row = {key: i for i, key in enumerate(first)}
    return pts[[row[key] for key in keys]]


def _batchable(c: CostSequence, r: Regularizer, fset: FeasibleSet) -> bool:
    kind = r.effective(fset).kind
    return (isinstance(fset, PositiveBox) and c.kind is CostKind.POISSON
            and kind in (RegKind.EUCLIDEAN, RegKind.NEG_ENTROPY, RegKind.BURG))


def _box_steps(G, X, eta, kind, lo, hi):
    if kind is RegKind.EUCLIDEAN:
        return np.clip(X - eta * G, lo, hi)
    if kind is RegKind.NEG_ENTROPY:
        with np.errstate(over="ignore"):
            return np.clip(X * np.exp(-eta * G), lo, hi)
    den = 1.0 / X + eta * G
    with np.errstate(divide="ignore"):
        return np.where(den > 0, np.clip(1.0 / np.where(den > 0, den, 1.0), lo, hi), hi)


def _iterate_rounds(c, rounds, eta, r, fset, tol, max_iters):
    """Cold-started offline iterations for many Poisson rounds at once on a box.

    Each row follows exactly the iteration of :func:`_iterate` and is frozen at its
    own stopping index.
    """
    kind = r.effective(fset).kind
    A, b = c.data["A"][rounds - 1], c.data["b"][rounds - 1]
    X = np.tile(fset.center(), (rounds.size, 1))
    done = np.zeros(rounds.size, dtype=bool)
    for _ in range(max_iters):
        act = ~done
        if not np.any(act):
            break
        Xa, Aa = X[act], A[act]
        Ax = np.einsum("kmd,kd->km", Aa, Xa)
        G = np.einsum("km,kmd->kd", 1.0 - b[act] / Ax, Aa)
        Z = _box_steps(G, Xa, eta, kind, fset.lower, fset.upper)
        moved = np.linalg.norm(Z - Xa, axis=1)
        X[act] = Z
        done[np.nonzero(act)[0][moved <= tol]] = True
    return X, done


def write_comparators(path, U) -> None:
    U = np.asarray(U, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"u_{i + 1}" for i in range(U.shape[1]))])
        for t, u in enumerate(U, start=1):
            w.writerow([t, *u.tolist()])


def read_comparators(path, dim: int | None = None) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty comparator file")
    body = rows[1:]
    try:
        U = np.array([[float(v) for v in row[1:]] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: malformed comparator file ({exc})") from exc
    if U.ndim != 2 or (dim is not None and U.shape[1] != dim):
        raise InputError(f"{path}: expected {dim} coordinates per round")
    bad = ~np.all(np.isfinite(U), axis=1)
    if np.any(bad):
        raise InputError(f"comparator for round {int(np.argmax(bad)) + 1} is not finite")
    return U
