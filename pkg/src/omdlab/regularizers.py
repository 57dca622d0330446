"""Regularization functions, their Bregman divergences, and the constants gamma and R.

Every method accepts either a single point (shape ``(d,)``) or a batch of points
(shape ``(n, d)``); reductions run over the last axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import kl_div

from .errors import DomainError, InputError
from .geometry import FeasibleSet, NormKind, PositiveBox, TruncatedSimplex, norms

DEFAULT_SAMPLES = 2000
DEFAULT_SEED = 42


class RegKind(enum.Enum):
    EUCLIDEAN = "l2sq"
    NEG_ENTROPY = "kl"
    BURG = "burg"
    L1_SQUARED = "l1sq"


@dataclass(frozen=True)
class Regularizer:
    kind: RegKind
    dim: int

    def __post_init__(self):
        if not isinstance(self.kind, RegKind):
            object.__setattr__(self, "kind", RegKind(self.kind))
        if self.dim < 1:
            raise InputError("dim must be positive")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def primal_norm(self) -> NormKind:
        """Norm w.r.t. which gamma, C_T and M are reported for this regularizer."""
        return NormKind.L2 if self.kind is RegKind.EUCLIDEAN else NormKind.L1

    def effective(self, fset: FeasibleSet) -> "Regularizer":
        """Geometry actually used by the mirror step on ``fset``.

        On the simplex the l1-squared function is constant, so its divergence
        vanishes and the step falls back to the Euclidean geometry.
        """
        if self.kind is RegKind.L1_SQUARED and isinstance(fset, TruncatedSimplex):
            return Regularizer(RegKind.EUCLIDEAN, self.dim)
        return self

    # -- domain ---------------------------------------------------------------

    def _check(self, x, interior=True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise InputError(f"dimension mismatch: expected {self.dim}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite coordinates")
        k = self.kind
        if k is RegKind.BURG or (k is RegKind.NEG_ENTROPY and interior):
            if np.any(x <= 0):
                raise DomainError(f"{k.value} requires strictly positive coordinates")
        elif k in (RegKind.NEG_ENTROPY, RegKind.L1_SQUARED):
            if np.any(x < 0):
                raise DomainError(f"{k.value} requires nonnegative coordinates")
        return x

    # -- oracles --------------------------------------------------------------

    def value(self, x):
        k = self.kind
        x = self._check(x, interior=k is not RegKind.NEG_ENTROPY)
        if k is RegKind.EUCLIDEAN:
            return 0.5 * np.sum(x * x, axis=-1)
        if k is RegKind.NEG_ENTROPY:
            return np.sum(np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0) - x, axis=-1)
        if k is RegKind.BURG:
            return -np.sum(np.log(x), axis=-1)
        return 0.5 * np.sum(x, axis=-1) ** 2

    def gradient(self, x):
        x = self._check(x)
        k = self.kind
        if k is RegKind.EUCLIDEAN:
            return x.copy()
        if k is RegKind.NEG_ENTROPY:
            return np.log(x)
        if k is RegKind.BURG:
            return -1.0 / x
        return np.broadcast_to(np.sum(x, axis=-1, keepdims=True), x.shape).copy()

    def hessian_quadratic(self, x, v):
        """``v^T grad^2 r(x) v``."""
        x = self._check(x)
        v = np.asarray(v, dtype=np.float64)
        k = self.kind
        if k is RegKind.EUCLIDEAN:
            return np.sum(v * v, axis=-1)
        if k is RegKind.NEG_ENTROPY:
            return np.sum(v * v / x, axis=-1)
        if k is RegKind.BURG:
            return np.sum((v / x) ** 2, axis=-1)
        return np.sum(v, axis=-1) ** 2

    def hessian_matrix(self, x):
        x = self._check(x)
        k = self.kind
        if k is RegKind.EUCLIDEAN:
            diag = np.ones_like(x)
        elif k is RegKind.NEG_ENTROPY:
            diag = 1.0 / x
        elif k is RegKind.BURG:
            diag = 1.0 / (x * x)
        else:
            return np.ones(x.shape + (self.dim,))
        out = np.zeros(x.shape + (self.dim,))
        idx = np.arange(self.dim)
        out[..., idx, idx] = diag
        return out

    def bregman(self, x, y):
        """``D_r(x, y) = r(x) - r(y) - <grad r(y), x - y>`` in cancellation-free form."""
        k = self.kind
        x = self._check(x, interior=k is not RegKind.NEG_ENTROPY)
        y = self._check(y)
        if k is RegKind.EUCLIDEAN:
            diff = x - y
            return 0.5 * np.sum(diff * diff, axis=-1)
        if k is RegKind.NEG_ENTROPY:
            return np.sum(kl_div(x, y), axis=-1)
        if k is RegKind.BURG:
            q = (x - y) / y
            return np.sum(q - np.log1p(q), axis=-1)
        return 0.5 * (np.sum(x, axis=-1) - np.sum(y, axis=-1)) ** 2


def make(name: str, dim: int) -> Regularizer:
    return Regularizer(RegKind(name), dim)


# functional surface

def reg_value(r: Regularizer, x):
    return float(r.value(x))


def reg_gradient(r: Regularizer, x) -> np.ndarray:
    return r.gradient(x)


def reg_hessian_quadratic(r: Regularizer, x, v) -> float:
    return float(r.hessian_quadratic(x, v))


def bregman(r: Regularizer, x, y) -> float:
    return float(r.bregman(x, y))


# -- constants -----------------------------------------------------------------


@dataclass(frozen=True)
class BregmanConstants:
    gamma: float
    R: float
    estimated_on: FeasibleSet
    samples: int
    seed: int


def _probe_points(fset: FeasibleSet, samples: int, seed) -> np.ndarray:
    if samples < 1:
        raise InputError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    return np.vstack([fset.vertices(), fset.sample(samples, rng)])


def estimate_gamma(r: Regularizer, fset: FeasibleSet, samples: int = DEFAULT_SAMPLES,
                   seed: int = DEFAULT_SEED) -> float:
    """Lipschitz constant of ``x -> D_r(x, z)`` over the set, w.r.t. ``r.primal_norm``.

    ``D_r(x,z) - D_r(y,z) = r(x) - r(y) - <grad r(z), x - y>`` so ``2 sup ||grad r||_*``
    is an envelope; the supported regularizers have convex ``||grad r||_*`` on the
    sets, hence the sup is taken at a vertex.  The sampled triple ratio is kept as a
    cross-check and the larger of the two is returned.
    """
    pts = _probe_points(fset, samples, seed)
    dual = r.primal_norm.dual
    envelope = 2.0 * float(norms(r.gradient(pts), dual).max())

    rng = np.random.default_rng([seed, 1])
    X = fset.sample(samples, rng)
    Y = fset.sample(samples, rng)
    Z = fset.sample(samples, rng)
    dist = norms(X - Y, r.primal_norm)
    keep = dist > 1e-12
    ratio = 0.0
    if np.any(keep):
        num = np.abs(r.bregman(X[keep], Z[keep]) - r.bregman(Y[keep], Z[keep]))
        ratio = float((num / dist[keep]).max())
    return max(envelope, ratio)


def estimate_R(r: Regularizer, fset: FeasibleSet, samples: int = DEFAULT_SAMPLES,
               seed: int = DEFAULT_SEED) -> float:
    """``max_{x,y} D_r(x, y)``: sampled pairs refined by every vertex pair."""
    if samples < 1:
        raise InputError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    X = fset.sample(samples, rng)
    Y = fset.sample(samples, rng)
    best = float(r.bregman(X, Y).max())

    if isinstance(fset, PositiveBox) and r.kind is not RegKind.L1_SQUARED:
        # separable divergence, each term maximized at an endpoint pair:
        # equivalent to scanning all 4^d corner pairs
        lo, hi = fset.lower, fset.upper
        cand = np.stack([
            _coordwise(r, lo, hi), _coordwise(r, hi, lo),
        ])
        best = max(best, float(cand.max(axis=0).sum()))
    elif isinstance(fset, PositiveBox):
        best = max(best, 0.5 * float(np.sum(fset.upper) - np.sum(fset.lower)) ** 2)
    else:
        V = fset.vertices()
        d = V.shape[0]
        I, J = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        best = max(best, float(r.bregman(V[I.ravel()], V[J.ravel()]).max()))
    return best


def _coordwise(r: Regularizer, x, y) -> np.ndarray:
    one = Regularizer(r.kind, 1)
    return np.array([float(one.bregman(x[i:i + 1], y[i:i + 1])) for i in range(x.shape[0])])


def bregman_constants(r: Regularizer, fset: FeasibleSet, samples: int = DEFAULT_SAMPLES,
                      seed: int = DEFAULT_SEED) -> BregmanConstants:
    return BregmanConstants(
        gamma=estimate_gamma(r, fset, samples, seed),
        R=estimate_R(r, fset, samples, seed),
        estimated_on=fset,
        samples=samples,
        seed=seed,
    )
