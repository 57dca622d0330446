"""Regularity measures, dynamic/static regret and the regret-bound evaluators."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .costs import CostKind, CostSequence, SmoothnessCertificate
from .errors import InputError
from .geometry import FeasibleSet, NormKind, PositiveBox, diameter, norms
from .omd import Trajectory
from .regularizers import BregmanConstants

VERDICT_TOL = 1e-6
ASCENT_STEPS = 20
FIRST_BLOCK = 64


def path_length(U, kind: NormKind) -> float:
    """``sum_{t=1}^{T-1} ||u_{t+1} - u_t||`` (no wrap-around term)."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 1:
        raise InputError("need a non-empty (T, d) comparator array")
    return math.fsum(norms(np.diff(U, axis=0), kind).tolist())


# -- sup estimation -----------------------------------------------------------------


def _ascent_scale(fset: FeasibleSet) -> float:
    if isinstance(fset, PositiveBox):
        return 0.1 * float(np.mean(fset.upper - fset.lower))
    return 0.1


def _refine(phi, grad, X, fset, scale):
    """Projected gradient ascent that only accepts improving moves, run on each row of
    ``X`` independently (each row keeps its own step size)."""
    X = np.array(X, dtype=np.float64)
    best = phi(X)
    step = np.full(X.shape[0], scale)
    live = np.ones(X.shape[0], dtype=bool)
    for _ in range(ASCENT_STEPS):
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        G = grad(X[idx])
        gn = np.linalg.norm(G, axis=-1)
        ok = np.isfinite(gn) & (gn > 0)
        live[idx[~ok]] = False
        idx, G, gn = idx[ok], G[ok], gn[ok]
        if idx.size == 0:
            break
        cand = _project_rows(fset, X[idx] + (step[idx] / gn)[:, None] * G)
        val = phi(cand)
        up = val > best[idx]
        X[idx[up]], best[idx[up]] = cand[up], val[up]
        step[idx] *= np.where(up, 2.0, 0.5)
    return best


def _project_rows(fset: FeasibleSet, Y):
    if isinstance(fset, PositiveBox):
        return np.clip(Y, fset.lower, fset.upper)
    return np.array([fset.project(y) for y in Y])


def sampled_sup(phi, grad, fset: FeasibleSet, n: int, seed) -> float:
    """Lower estimate of ``sup_{x in set} phi(x)``.

    The best sample of each complete dyadic block of the sample sequence
    (``[0,64), [64,128), [128,256), ...``) is refined by local ascent; since the
    sample stream is a fixed prefix for a given seed, the estimate is
    nondecreasing in ``n``.  ``phi`` and ``grad`` act on ``(k, d)`` batches.
    """
    if n < 1:
        raise InputError("sup_samples must be >= 1")
    X = fset.sample(n, np.random.default_rng(seed))
    vals = phi(X)
    best = float(vals.max())
    starts = []
    lo, hi = 0, FIRST_BLOCK
    while hi <= n:
        starts.append(lo + int(np.argmax(vals[lo:hi])))
        lo, hi = hi, 2 * hi
    if starts:
        best = max(best, float(_refine(phi, grad, X[starts], fset, _ascent_scale(fset)).max()))
    return best


def _dual_subgradient(V, kind: NormKind):
    """Row-wise maximizer of ``<v, s>`` over the unit ball of ``kind``'s dual."""
    V = np.asarray(V, dtype=np.float64)
    if kind is NormKind.L2:
        n = np.linalg.norm(V, axis=-1, keepdims=True)
        return np.divide(V, n, out=np.zeros_like(V), where=n > 0)
    if kind is NormKind.L1:
        return np.sign(V)
    S = np.zeros_like(V)
    k = np.argmax(np.abs(V), axis=-1)[..., None]
    np.put_along_axis(S, k, np.sign(np.take_along_axis(V, k, axis=-1)), axis=-1)
    return S


def functional_variation(c: CostSequence, fset: FeasibleSet, sup_samples: int = 2000,
                         seed: int = 42) -> float:
    """Sampled ``sum_{t=1}^{T-1} sup_x |f_{t+1}(x) - f_t(x)|`` (a lower estimate)."""
    terms = []
    for t in range(1, c.T):
        if c.group_key(t) == c.group_key(t + 1):
            continue

        def phi(X, t=t):
            return np.abs(c.value(t + 1, X) - c.value(t, X))

        def grad(X, t=t):
            diff = c.value(t + 1, X) - c.value(t, X)
            return np.sign(diff)[:, None] * (c.gradient(t + 1, X) - c.gradient(t, X))

        terms.append(sampled_sup(phi, grad, fset, sup_samples, [seed, t]))
    return math.fsum(terms)


def gradient_variation(c: CostSequence, fset: FeasibleSet, dual_norm: NormKind,
                       sup_samples: int = 2000, seed: int = 42) -> float:
    """Sampled ``sum_{t=2}^{T} sup_x ||grad f_t(x) - grad f_{t-1}(x)||_*``.

    The ``t = 1`` term vanishes under the convention ``f_0 = f_1``.
    """
    terms = []
    for t in range(2, c.T + 1):
        if c.group_key(t) == c.group_key(t - 1):
            continue

        def phi(X, t=t):
            return norms(c.gradient(t, X) - c.gradient(t - 1, X), dual_norm)

        def grad(X, t=t):
            delta = c.gradient(t, X) - c.gradient(t - 1, X)
            J = c.hessian_matrix(t, X) - c.hessian_matrix(t - 1, X)
            return np.einsum("kij,kj->ki", J, _dual_subgradient(delta, dual_norm))

        terms.append(sampled_sup(phi, grad, fset, sup_samples, [seed, t]))
    return math.fsum(terms)


def _affine_sup_abs(a, b0, fset: FeasibleSet) -> float:
    if isinstance(fset, PositiveBox):
        hi = b0 + np.sum(np.maximum(a * fset.lower, a * fset.upper))
        lo = b0 + np.sum(np.minimum(a * fset.lower, a * fset.upper))
        return float(max(abs(hi), abs(lo)))
    return float(np.abs(fset.vertices() @ a + b0).max())


def analytic_functional_variation(c: CostSequence, fset: FeasibleSet) -> float | None:
    """Exact V_T for the quadratic family (differences are affine); None otherwise."""
    if c.kind is not CostKind.SYNTHETIC:
        return None
    s, C = c.scales, c.data["centers"]
    terms = []
    for t in range(c.T - 1):
        a = s * (C[t] - C[t + 1])
        b0 = 0.5 * float(np.sum(s * (C[t + 1] ** 2 - C[t] ** 2)))
        terms.append(_affine_sup_abs(a, b0, fset))
    return math.fsum(terms)


def analytic_gradient_variation(c: CostSequence, dual_norm: NormKind) -> float | None:
    """Exact G_T for the quadratic family (gradient differences are constant)."""
    if c.kind is not CostKind.SYNTHETIC:
        return None
    D = c.scales * np.diff(c.data["centers"], axis=0)
    return math.fsum(norms(D, dual_norm).tolist())


@dataclass(frozen=True)
class RegularityMeasures:
    C_T: float
    V_T: float
    G_T: float
    norm: NormKind
    sup_samples: int
    seed: int
    V_T_analytic: float | None = None
    G_T_analytic: float | None = None

    @property
    def V_for_bound(self) -> float:
        return self.V_T if self.V_T_analytic is None else self.V_T_analytic

    @property
    def G_for_bound(self) -> float:
        return self.G_T if self.G_T_analytic is None else self.G_T_analytic

    @property
    def sup_source(self) -> str:
        return "analytic" if self.V_T_analytic is not None else "sampled-sup"


def regularity_measures(c: CostSequence, U, fset: FeasibleSet, norm: NormKind,
                        sup_samples: int = 2000, seed: int = 42) -> RegularityMeasures:
    return RegularityMeasures(
        C_T=path_length(U, norm),
        V_T=functional_variation(c, fset, sup_samples, seed),
        G_T=gradient_variation(c, fset, norm.dual, sup_samples, seed),
        norm=norm,
        sup_samples=sup_samples,
        seed=seed,
        V_T_analytic=analytic_functional_variation(c, fset),
        G_T_analytic=analytic_gradient_variation(c, norm.dual),
    )


# -- regret --------------------------------------------------------------------------


def _comparator_costs(c: CostSequence, U) -> list[float]:
    U = np.asarray(U, dtype=np.float64)
    if U.shape != (c.T, c.dim):
        raise InputError(f"comparators must have shape {(c.T, c.dim)}, got {U.shape}")
    return [float(c.value(t, U[t - 1])) for t in range(1, c.T + 1)]


def dynamic_regret(traj: Trajectory, c: CostSequence, U) -> float:
    """``sum_t f_t(x_t) - sum_t f_t(u_t)`` with compensated summation."""
    if traj.T != c.T:
        raise InputError("trajectory and cost horizons differ")
    learner = traj.costs.tolist()
    return math.fsum(learner + [-v for v in _comparator_costs(c, U)])


def static_regret(traj: Trajectory, c: CostSequence, u_star) -> float:
    """Regret against one fixed point (the hindsight minimizer when given one)."""
    return dynamic_regret(traj, c, np.tile(np.asarray(u_star, dtype=np.float64), (c.T, 1)))


def theorem1_bound(beta, R, f1_x1, fT1_xT1, gamma, C_T, V_T) -> float:
    """``beta R + f_1(x_1) - f_{T+1}(x_{T+1}) + gamma beta C_T + V_T``."""
    if beta < 0 or R < 0 or gamma < 0:
        raise InputError("beta, R and gamma must be nonnegative")
    return math.fsum([beta * R, f1_x1, -fT1_xT1, gamma * beta * C_T, V_T])


def theorem2_bound(beta, lambda_, D_u1_x0, gamma, C_T, M, G_T) -> float:
    """``(beta - lambda) D_r(u_1, x_0) + (beta - lambda) gamma C_T + 2 M G_T``."""
    if lambda_ < 0:
        raise InputError("lambda must be nonnegative")
    if lambda_ > beta:
        raise InputError(f"lambda ({lambda_}) exceeds beta ({beta})")
    gap = beta - lambda_
    return math.fsum([gap * D_u1_x0, gap * gamma * C_T, 2.0 * M * G_T])


@dataclass
class RegretReport:
    regularizer: str
    geometry: str
    T: int
    eta: float
    dynamic_regret: float
    static_regret: float | None
    C_T: float
    V_T: float
    G_T: float
    V_T_analytic: float | None
    G_T_analytic: float | None
    sup_source: str
    norm: str
    beta: float
    lambda_: float
    gamma: float
    R: float
    M: float
    D_u1_x0: float
    f1_x1: float
    fT1_xT1: float
    thm1_bound: float | None
    thm2_bound: float | None
    corollary_bound: float | None
    thm1_verdict: bool | None
    thm2_verdict: bool | None
    corollary_verdict: bool | None
    static_specialization: bool
    bound_checks: bool

    def verdicts(self) -> dict:
        out = {}
        for name in ("thm1", "thm2", "corollary"):
            v = getattr(self, f"{name}_verdict")
            if v is not None:
                out[name] = v
        return out

    @property
    def all_verdicts_pass(self) -> bool:
        return all(self.verdicts().values())

    # -- serialization --

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_row(self) -> list[str]:
        return [_fmt(v) for v in asdict(self).values()]

    @classmethod
    def from_row(cls, row) -> "RegretReport":
        kinds = {f.name: f.type for f in fields(cls)}
        vals = {}
        for name, raw in zip(cls.columns(), row):
            vals[name] = _parse(raw, kinds[name])
        return cls(**vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        w.writerow(self.to_row())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RegretReport":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != cls.columns():
            raise InputError("report columns do not match the expected layout")
        return cls.from_row(rows[1])

    def summary(self) -> str:
        lines = [
            f"regularizer {self.regularizer} (geometry {self.geometry}), T={self.T}, eta={self.eta:.6g}",
            f"  dynamic regret   {self.dynamic_regret:.6g}",
        ]
        if self.static_regret is not None:
            lines.append(f"  static regret    {self.static_regret:.6g}")
        lines += [
            f"  C_T={self.C_T:.6g} ({self.norm})  V_T={self.V_T:.6g}  G_T={self.G_T:.6g}  [{self.sup_source}]",
            f"  beta={self.beta:.6g} lambda={self.lambda_:.6g} gamma={self.gamma:.6g} R={self.R:.6g} M={self.M:.6g}",
        ]
        if not self.bound_checks:
            lines.append("  bound checks disabled (eta is not 1/beta)")
        for name, bound in (("theorem 1", self.thm1_bound), ("theorem 2", self.thm2_bound),
                            ("corollary", self.corollary_bound)):
            if bound is None:
                continue
            key = {"theorem 1": "thm1", "theorem 2": "thm2", "corollary": "corollary"}[name]
            v = getattr(self, f"{key}_verdict")
            status = "n/a" if v is None else ("PASS" if v else "FAIL")
            lines.append(f"  {name:<10} bound {bound:.6g}  {status}")
        if self.static_specialization:
            lines.append("  fixed comparator: C_T = 0, bounds specialize to static regret")
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, kind: str):
    if raw == "":
        return None
    if "bool" in kind:
        return raw == "true"
    if kind == "int":
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def evaluate_run(traj: Trajectory, c: CostSequence, U, cert: SmoothnessCertificate,
                 consts: BregmanConstants, fset: FeasibleSet,
                 measures: RegularityMeasures | None = None, u_star=None,
                 static_comparator: bool = False, sup_samples: int = 2000,
                 seed: int = 42) -> RegretReport:
    """Assemble regret, regularity measures, constants and bound verdicts for one run.

    Bounds are evaluated in the step's effective geometry.  ``x_0`` is taken equal
    to ``x_1`` and ``f_{T+1}`` equal to ``f_T``.  Verdicts are only issued when the
    run used ``eta = 1/beta``.
    """
    r = traj.regularizer.effective(fset)
    U = np.asarray(U, dtype=np.float64)
    if measures is None:
        measures = regularity_measures(c, U, fset, r.primal_norm, sup_samples, seed)
    reg = dynamic_regret(traj, c, U)
    sreg = static_regret(traj, c, u_star) if u_star is not None else None
    x1, xT1 = traj.points[0], traj.points[-1]
    f1_x1 = float(traj.costs[0])
    fT1_xT1 = float(c.value(c.T, xT1))
    D0 = float(r.bregman(U[0], x1))
    M = diameter(fset, r.primal_norm)
    beta, lam = cert.beta, cert.lambda_

    bound_checks = math.isclose(traj.eta, 1.0 / beta, rel_tol=1e-12)
    thm1 = theorem1_bound(beta, consts.R, f1_x1, fT1_xT1, consts.gamma, measures.C_T, measures.V_for_bound)
    thm2 = None
    if lam > 0:
        thm2 = theorem2_bound(beta, lam, D0, consts.gamma, measures.C_T, M, measures.G_for_bound)
    cor = min(thm1, thm2) if thm2 is not None else None

    def verdict(bound):
        if bound is None or not bound_checks:
            return None
        return bool(bound + VERDICT_TOL >= reg)

    return RegretReport(
        regularizer=traj.regularizer.name,
        geometry=r.name,
        T=c.T,
        eta=float(traj.eta),
        dynamic_regret=reg,
        static_regret=sreg,
        C_T=measures.C_T,
        V_T=measures.V_T,
        G_T=measures.G_T,
        V_T_analytic=measures.V_T_analytic,
        G_T_analytic=measures.G_T_analytic,
        sup_source=measures.sup_source,
        norm=measures.norm.value,
        beta=float(beta),
        lambda_=float(lam),
        gamma=float(consts.gamma),
        R=float(consts.R),
        M=float(M),
        D_u1_x0=D0,
        f1_x1=f1_x1,
        fT1_xT1=fT1_xT1,
        thm1_bound=thm1,
        thm2_bound=thm2,
        corollary_bound=cor,
        thm1_verdict=verdict(thm1),
        thm2_verdict=verdict(thm2),
        corollary_verdict=verdict(cor),
        static_specialization=bool(static_comparator and measures.C_T == 0.0),
        bound_checks=bound_checks,
    )
