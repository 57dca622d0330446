"""Decision-space primitives: norms, feasible sets, sampling and vertices."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

DEFAULT_EPSILON = 1e-6
FEASIBILITY_TOL = 1e-9


class NormKind(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @property
    def dual(self) -> "NormKind":
        return _DUALS[self]

    @property
    def order(self):
        return {NormKind.L1: 1, NormKind.L2: 2, NormKind.LINF: np.inf}[self]


_DUALS = {NormKind.L1: NormKind.LINF, NormKind.L2: NormKind.L2, NormKind.LINF: NormKind.L1}


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-d float64 array, optionally checking its length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"expected a 1-d vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InputError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError("point has non-finite coordinates")
    return arr


def norm(x, kind: NormKind) -> float:
    x = as_point(x)
    return float(np.linalg.norm(x, kind.order))


def norms(X: np.ndarray, kind: NormKind) -> np.ndarray:
    """Row-wise norms of a 2-d array."""
    return np.linalg.norm(X, kind.order, axis=-1)


@dataclass(frozen=True)
class TruncatedSimplex:
    """``{x : sum(x) = 1, x_i >= epsilon}``."""

    dim: int
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("dim must be positive")
        if not (0.0 <= self.epsilon < 1.0 / self.dim):
            raise InputError(
                f"epsilon must lie in [0, 1/dim) = [0, {1.0 / self.dim:g}), got {self.epsilon!r}"
            )

    kind = "TruncatedSimplex"

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = as_point(x, self.dim)
        return bool(abs(x.sum() - 1.0) <= tol and np.all(x >= self.epsilon - tol))

    def center(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)

    def vertices(self) -> np.ndarray:
        d, eps = self.dim, self.epsilon
        V = np.full((d, d), eps)
        np.fill_diagonal(V, 1.0 - (d - 1) * eps)
        return V

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # uniform on the full simplex via normalized exponential spacings,
        # then shrunk toward the centroid so every coordinate is >= epsilon
        E = rng.exponential(size=(n, self.dim))
        S = E / E.sum(axis=1, keepdims=True)
        return S * (1.0 - self.dim * self.epsilon) + self.epsilon

    def project(self, y: np.ndarray) -> np.ndarray:
        from . import kernels

        return kernels.project_capped_simplex(as_point(y, self.dim), self.epsilon)

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal basis (d x (d-1)) of the directions with zero coordinate sum."""
        d = self.dim
        Q, _ = np.linalg.qr(np.eye(d) - 1.0 / d)
        return Q[:, : d - 1]


@dataclass(frozen=True)
class PositiveBox:
    """``{x : lower <= x <= upper}`` with ``0 < lower < upper``."""

    lower: np.ndarray = field()
    upper: np.ndarray = field()

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).copy()
        hi = np.asarray(self.upper, dtype=np.float64).copy()
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise InputError("lower and upper must be 1-d vectors of equal length")
        if not (np.all(lo > 0) and np.all(lo < hi)):
            raise InputError("PositiveBox requires 0 < lower_i < upper_i for all i")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InputError("box bounds must be finite")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    kind = "PositiveBox"

    @classmethod
    def uniform(cls, dim: int, lower: float, upper: float) -> "PositiveBox":
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, PositiveBox)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = as_point(x, self.dim)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def vertices(self, max_dim: int = 16) -> np.ndarray:
        if self.dim > max_dim:
            raise InputError(f"refusing to enumerate 2^{self.dim} box corners")
        corners = np.array(list(itertools.product((0, 1), repeat=self.dim)), dtype=bool)
        return np.where(corners, self.upper, self.lower)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        U = rng.random(size=(n, self.dim))
        return self.lower + U * (self.upper - self.lower)

    def project(self, y: np.ndarray) -> np.ndarray:
        return np.clip(as_point(y, self.dim), self.lower, self.upper)

    def tangent_basis(self) -> np.ndarray:
        return np.eye(self.dim)


FeasibleSet = TruncatedSimplex | PositiveBox


def contains(fset: FeasibleSet, x, tol: float = FEASIBILITY_TOL) -> bool:
    if tol < 0:
        raise InputError("tol must be nonnegative")
    return fset.contains(x, tol)


def diameter(fset: FeasibleSet, kind: NormKind) -> float:
    """``max_{x in set} ||x||``, attained at a vertex for both set kinds."""
    if isinstance(fset, PositiveBox):
        return norm(fset.upper, kind)
    return float(norms(fset.vertices(), kind).max())


def sample(fset: FeasibleSet, n: int, seed) -> np.ndarray:
    """``n`` feasible points, deterministic given ``seed``."""
    return fset.sample(n, np.random.default_rng(seed))
