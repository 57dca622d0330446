"""Time-indexed cost families and sampled certification of relative smoothness.

Rounds are 1-based throughout (``t = 1..T``).  Oracles accept a single point or a
batch of points of shape ``(n, d)``.
"""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import kl_div

from .errors import CertificationError, DomainError, InputError, NumericalError
from .geometry import FeasibleSet, as_point
from .regularizers import DEFAULT_SAMPLES, DEFAULT_SEED, RegKind, Regularizer

MIN_PIVOT = 1e-12
BETA_SAFETY = 1.05
LAMBDA_SAFETY = 0.95


class CostKind(enum.Enum):
    DOPTIMAL = "doptimal"
    POISSON = "poisson"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, eq=False)
class CostSequence:
    """A horizon-``T`` family ``f_1..f_T`` with value/gradient/Hessian oracles.

    Data layout per kind:

    - ``DOPTIMAL``: ``pool`` (P, m, d) and ``index`` (T,) selecting ``H_t = pool[index[t-1]]``
    - ``POISSON``: ``A`` (T, m, d) nonnegative and ``b`` (T, m) positive
    - ``SYNTHETIC``: ``scales`` (d,) positive and ``centers`` (T, d)
    """

    kind: CostKind
    T: int
    dim: int
    data: dict = field(repr=False)
    seed: int | None = None

    # -- constructors ---------------------------------------------------------

    @classmethod
    def doptimal(cls, matrices, index=None, seed=None) -> "CostSequence":
        pool = np.asarray(matrices, dtype=np.float64)
        if pool.ndim == 2:
            pool = pool[None]
        if pool.ndim != 3:
            raise InputError("D-optimal data must be a stack of m x d matrices")
        P, m, d = pool.shape
        index = np.arange(P) if index is None else np.asarray(index, dtype=np.int64)
        if m > d:
            raise InputError(f"D-optimal design needs m <= d, got m={m}, d={d}")
        for H in pool:
            if np.linalg.matrix_rank(H) < m:
                raise InputError("every H_t must have full row rank")
        if index.min() < 0 or index.max() >= P:
            raise InputError("round index out of pool range")
        return cls(CostKind.DOPTIMAL, int(index.shape[0]), d, {"pool": pool, "index": index}, seed)

    @classmethod
    def poisson(cls, A, b, seed=None) -> "CostSequence":
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if A.ndim == 2:
            A, b = A[None], b[None]
        if A.ndim != 3 or b.shape != A.shape[:2]:
            raise InputError("Poisson data must be A (T, m, d) and b (T, m)")
        if np.any(A < 0):
            raise InputError("A_t must be nonnegative")
        if np.any(b <= 0):
            raise InputError("b_t must be strictly positive")
        if np.any(A.sum(axis=1) <= 0):
            raise InputError("every column of A_t must be nonzero")
        return cls(CostKind.POISSON, A.shape[0], A.shape[2], {"A": A, "b": b}, seed)

    @classmethod
    def synthetic(cls, scales, centers, seed=None) -> "CostSequence":
        s = np.asarray(scales, dtype=np.float64)
        C = np.asarray(centers, dtype=np.float64)
        if C.ndim == 1:
            C = C[None]
        if s.ndim != 1 or C.shape[1] != s.shape[0]:
            raise InputError("scales (d,) and centers (T, d) required")
        if np.any(s <= 0):
            raise InputError("scales must be positive")
        return cls(CostKind.SYNTHETIC, C.shape[0], s.shape[0], {"scales": s, "centers": C}, seed)

    # -- per-round data ---------------------------------------------------------

    def _t(self, t: int) -> int:
        if not (1 <= t <= self.T):
            raise InputError(f"round {t} outside 1..{self.T}")
        return t - 1

    def H(self, t):
        return self.data["pool"][self.data["index"][self._t(t)]]

    def A(self, t):
        return self.data["A"][self._t(t)]

    def b(self, t):
        return self.data["b"][self._t(t)]

    def center(self, t):
        return self.data["centers"][self._t(t)]

    @property
    def scales(self):
        return self.data["scales"]

    def group_key(self, t: int):
        """Rounds with equal keys have identical cost functions."""
        if self.kind is CostKind.DOPTIMAL:
            return ("pool", int(self.data["index"][self._t(t)]))
        if self.kind is CostKind.SYNTHETIC:
            return ("center", self.center(t).tobytes())
        return ("round", t)

    @property
    def m(self) -> int:
        if self.kind is CostKind.DOPTIMAL:
            return self.data["pool"].shape[1]
        if self.kind is CostKind.POISSON:
            return self.data["A"].shape[1]
        return 1

    def truncated(self, T: int) -> "CostSequence":
        """The first ``T`` rounds."""
        if not 1 <= T <= self.T:
            raise InputError("T out of range")
        d = dict(self.data)
        if self.kind is CostKind.DOPTIMAL:
            d["index"] = d["index"][:T]
        elif self.kind is CostKind.POISSON:
            d["A"], d["b"] = d["A"][:T], d["b"][:T]
        else:
            d["centers"] = d["centers"][:T]
        return CostSequence(self.kind, T, self.dim, d, self.seed)

    # -- oracles --------------------------------------------------------------

    def _x(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise InputError(f"dimension mismatch: expected {self.dim}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite coordinates")
        if self.kind is not CostKind.SYNTHETIC and np.any(x <= 0):
            raise DomainError(f"{self.kind.value} cost requires strictly positive x")
        return x

    def _dopt_factor(self, t, x):
        H = self.H(t)
        M = np.einsum("ij,...j,kj->...ik", H, x, H)
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("H D(x) H^T is not positive definite") from exc
        piv = np.diagonal(L, axis1=-2, axis2=-1) ** 2
        if np.any(piv < MIN_PIVOT):
            raise NumericalError(f"H D(x) H^T is near singular (pivot {piv.min():.3e})")
        # W = L^{-1} H so that H^T M^{-1} H = W^T W
        W = np.linalg.solve(L, np.broadcast_to(H, L.shape[:-1] + H.shape[-1:]))
        return L, W

    def _ax(self, t, x):
        Ax = x @ self.A(t).T
        if np.any(Ax <= 0):
            raise DomainError("A_t x must be strictly positive")
        return Ax

    def value(self, t: int, x):
        x = self._x(x)
        k = self.kind
        if k is CostKind.DOPTIMAL:
            L, _ = self._dopt_factor(t, x)
            return -2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
        if k is CostKind.POISSON:
            return np.sum(kl_div(self.b(t), self._ax(t, x)), axis=-1)
        diff = x - self.center(t)
        return 0.5 * np.sum(self.scales * diff * diff, axis=-1)

    def gradient(self, t: int, x):
        x = self._x(x)
        k = self.kind
        if k is CostKind.DOPTIMAL:
            _, W = self._dopt_factor(t, x)
            return -np.sum(W * W, axis=-2)
        if k is CostKind.POISSON:
            return (1.0 - self.b(t) / self._ax(t, x)) @ self.A(t)
        return self.scales * (x - self.center(t))

    def hessian_matrix(self, t: int, x):
        x = self._x(x)
        k = self.kind
        if k is CostKind.DOPTIMAL:
            _, W = self._dopt_factor(t, x)
            G = np.swapaxes(W, -1, -2) @ W
            return G * G
        if k is CostKind.POISSON:
            A = self.A(t)
            w = self.b(t) / self._ax(t, x) ** 2
            return np.einsum("ki,...k,kj->...ij", A, w, A)
        out = np.zeros(x.shape + (self.dim,))
        idx = np.arange(self.dim)
        out[..., idx, idx] = self.scales
        return out

    def hessian_quadratic(self, t: int, x, v):
        """``v^T grad^2 f_t(x) v``."""
        x = self._x(x)
        v = np.asarray(v, dtype=np.float64)
        k = self.kind
        if k is CostKind.DOPTIMAL:
            _, W = self._dopt_factor(t, x)
            # tr((M^{-1} H D(v) H^T)^2) = || W D(v) W^T ||_F^2
            K = (W * v[..., None, :]) @ np.swapaxes(W, -1, -2)
            return np.sum(K * K, axis=(-2, -1))
        if k is CostKind.POISSON:
            A = self.A(t)
            return np.sum(self.b(t) * (v @ A.T) ** 2 / self._ax(t, x) ** 2, axis=-1)
        return np.sum(self.scales * v * v, axis=-1)


# functional surface

def cost_value(c: CostSequence, t: int, x) -> float:
    return float(c.value(t, as_point(x, c.dim)))


def cost_gradient(c: CostSequence, t: int, x) -> np.ndarray:
    return c.gradient(t, as_point(x, c.dim))


def cost_hessian_quadratic(c: CostSequence, t: int, x, v) -> float:
    return float(c.hessian_quadratic(t, as_point(x, c.dim), as_point(v, c.dim)))


# -- generators -----------------------------------------------------------------


def doptimal_sequence(T: int, m: int = 5, d: int = 10, pool_size: int = 10,
                      seed: int = DEFAULT_SEED) -> CostSequence:
    """``H_t`` drawn from a seeded pool of matrices with U[0,1] entries."""
    rng = np.random.default_rng(seed)
    pool = rng.random((pool_size, m, d))
    index = rng.integers(pool_size, size=T)
    return CostSequence.doptimal(pool, index, seed=seed)


def poisson_sequence(T: int, m: int = 150, d: int = 10, seed: int = DEFAULT_SEED) -> CostSequence:
    """``A_t`` with U[0,1] entries and ``b_t`` uniform on (0, 1]."""
    rng = np.random.default_rng(seed)
    A = rng.random((T, m, d))
    b = 1.0 - rng.random((T, m))
    return CostSequence.poisson(A, b, seed=seed)


def synthetic_sequence(T: int, fset: FeasibleSet, scales=None, drift: float = 0.01,
                       seed: int = DEFAULT_SEED) -> CostSequence:
    """Quadratics whose centers drift by projected random unit steps of length ``drift``."""
    rng = np.random.default_rng(seed)
    d = fset.dim
    s = rng.uniform(0.5, 2.0, size=d) if scales is None else np.asarray(scales, dtype=np.float64)
    C = np.empty((T, d))
    C[0] = fset.sample(1, rng)[0]
    for t in range(1, T):
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        C[t] = fset.project(C[t - 1] + drift * w)
    return CostSequence.synthetic(s, C, seed=seed)


# -- certification ----------------------------------------------------------------


@dataclass(frozen=True)
class SmoothnessCertificate:
    beta: float
    lambda_: float
    relative_to: RegKind
    samples: int
    seed: int
    max_quotient_observed: float
    min_quotient_observed: float


def _scaled_eigenvalues(Hf, Hr, zero_sum: bool):
    """Generalized eigenvalues of ``Hf`` relative to a diagonal ``Hr``, batched.

    With ``v = Hr^{-1/2} w`` the quotient becomes a Rayleigh quotient of
    ``S = Hr^{-1/2} Hf Hr^{-1/2}`` in ``w``; scaling first keeps the problem well
    conditioned when the diagonal spans many orders of magnitude.  With
    ``zero_sum`` the directions satisfy ``sum(v) = 0``, i.e. ``w`` is orthogonal to
    ``s = diag(Hr)^{-1/2}``; a Householder basis of that complement is used.
    """
    s = 1.0 / np.sqrt(np.diagonal(Hr, axis1=-2, axis2=-1))
    S = s[:, :, None] * Hf * s[:, None, :]
    if zero_sum:
        a = s / np.linalg.norm(s, axis=1, keepdims=True)
        u = a.copy()
        u[:, 0] += np.where(a[:, 0] >= 0, 1.0, -1.0)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        B = np.eye(s.shape[1]) - 2.0 * u[:, :, None] * u[:, None, :]
        B = B[:, :, 1:]
        S = np.swapaxes(B, 1, 2) @ S @ B
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, 1, 2)))


def _quotient_extremes(c: CostSequence, r: Regularizer, X, ts, V, Q):
    qmax, qmin = -np.inf, np.inf
    use_eig = r.kind is not RegKind.L1_SQUARED
    for t in np.unique(ts):
        sel = ts == t
        Xt, Vt = X[sel], V[sel]
        rq = r.hessian_quadratic(Xt, Vt)
        scale = np.sum(Vt * Vt, axis=-1)
        bad = np.nonzero(rq <= 1e-12 * scale)[0]
        if bad.size:
            v = Vt[bad[0]]
            raise CertificationError(
                f"regularizer {r.name} has a degenerate Hessian along direction {np.array2string(v, precision=4)}"
                f" at a sampled point; the Hessian quotient is undefined",
                direction=v,
            )
        q = c.hessian_quadratic(int(t), Xt, Vt) / rq
        qmax, qmin = max(qmax, q.max()), min(qmin, q.min())
        if use_eig:
            ev = _scaled_eigenvalues(c.hessian_matrix(int(t), Xt), r.hessian_matrix(Xt), Q.shape[1] < r.dim)
            qmax, qmin = max(qmax, ev[:, -1].max()), min(qmin, ev[:, 0].min())
    return float(qmax), float(qmin)


def certify_relative_smoothness(c: CostSequence, r: Regularizer, fset: FeasibleSet,
                                samples: int = DEFAULT_SAMPLES,
                                seed: int = DEFAULT_SEED) -> SmoothnessCertificate:
    """Sampled bounds ``lambda * grad^2 r <= grad^2 f_t <= beta * grad^2 r`` on the set.

    Points are the set's vertices plus ``samples`` random feasible points, each paired
    with a random round; at each point the quotient is evaluated along a random
    tangent direction and, for regularizers with nonsingular Hessian, at the exact
    generalized-eigenvalue extremes.
    """
    if samples < 1:
        raise InputError("samples must be >= 1")
    if r.dim != c.dim or fset.dim != c.dim:
        raise InputError("dimension mismatch between cost, regularizer and set")
    rng = np.random.default_rng(seed)
    try:
        verts = fset.vertices()
    except InputError:
        verts = np.empty((0, c.dim))
    X = np.vstack([verts, fset.sample(samples, rng)])
    ts = rng.integers(1, c.T + 1, size=X.shape[0])
    Q = fset.tangent_basis()
    V = rng.standard_normal((X.shape[0], Q.shape[1])) @ Q.T
    qmax, qmin = _quotient_extremes(c, r, X, ts, V, Q)
    if not qmax > 0:
        raise CertificationError(f"cost has no positive curvature relative to {r.name}")
    return SmoothnessCertificate(
        beta=BETA_SAFETY * qmax,
        lambda_=max(0.0, LAMBDA_SAFETY * qmin),
        relative_to=r.kind,
        samples=samples,
        seed=seed,
        max_quotient_observed=qmax,
        min_quotient_observed=qmin,
    )


# -- CSV bundles -------------------------------------------------------------------


def dump_bundle(c: CostSequence, directory) -> None:
    """One ``round_XXXX.csv`` per round (header ``kind,m,d``) plus ``manifest.csv``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "T", "m", "d", "seed"])
        w.writerow([c.kind.value, c.T, c.m, c.dim, "" if c.seed is None else c.seed])
    for t in range(1, c.T + 1):
        with open(os.path.join(directory, f"round_{t:04d}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "m", "d"])
            w.writerow([c.kind.value, c.m, c.dim])
            if c.kind is CostKind.DOPTIMAL:
                w.writerows(c.H(t).tolist())
            elif c.kind is CostKind.POISSON:
                w.writerows(c.A(t).tolist())
                w.writerow(c.b(t).tolist())
            else:
                w.writerow(c.scales.tolist())
                w.writerow(c.center(t).tolist())


def load_bundle(directory) -> CostSequence:
    with open(os.path.join(directory, "manifest.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    kind, T, m, d, seed = rows[1]
    kind, T, m, d = CostKind(kind), int(T), int(m), int(d)
    seed = int(seed) if seed else None
    rounds = []
    for t in range(1, T + 1):
        with open(os.path.join(directory, f"round_{t:04d}.csv"), newline="") as fh:
            body = list(csv.reader(fh))
        if body[1] != [kind.value, str(m), str(d)]:
            raise InputError(f"round {t}: header {body[1]} disagrees with manifest")
        rounds.append([[float(v) for v in row] for row in body[2:]])
    if kind is CostKind.DOPTIMAL:
        mats = [np.array(r, dtype=np.float64) for r in rounds]
        keys, pool, index = {}, [], []
        for H in mats:
            k = H.tobytes()
            if k not in keys:
                keys[k] = len(pool)
                pool.append(H)
            index.append(keys[k])
        return CostSequence.doptimal(np.stack(pool), np.array(index), seed=seed)
    if kind is CostKind.POISSON:
        A = np.stack([np.array(r[:m], dtype=np.float64) for r in rounds])
        b = np.stack([np.array(r[m], dtype=np.float64) for r in rounds])
        return CostSequence.poisson(A, b, seed=seed)
    s = np.array(rounds[0][0], dtype=np.float64)
    C = np.stack([np.array(r[1], dtype=np.float64) for r in rounds])
    return CostSequence.synthetic(s, C, seed=seed)
