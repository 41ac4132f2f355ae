"""Compact operators as finite blocks with decaying diagonal tails, and
cocycles built from them.

An operator acts block-diagonally: a dense M x M matrix on the first M
coordinates and a scalar diagonal tail tau(n) for n > M with tau(n) -> 0
(the compactness surrogate). Products, duals and perturbations all stay in
this class, so the infinite-dimensional part is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import base as basemod
from .errors import ShapeError

_TAIL_SCAN = 4096  # sample range used for sup of non-monotone tails


class Tail:
    """A scalar diagonal tail tau(n), n > M.

    Closed under pointwise products. `nonincreasing` means |tau| is
    nonincreasing in n, so the sup beyond M is attained at M + 1.
    """

    def __init__(self, fn: Callable[[int], float], label: str,
                 nonincreasing: bool, limit: float = 0.0, power: int = 1):
        self._fn = fn
        self.label = label
        self.nonincreasing = nonincreasing
        self.limit = limit
        self.power = power  # tau(n) = fn(n) ** power

    def __call__(self, n: int) -> float:
        v = self._fn(n)
        return v if self.power == 1 else v ** self.power

    def __repr__(self):
        return f"Tail({self.label})"

    @property
    def is_zero(self) -> bool:
        return self.label == "zero"

    @property
    def is_one(self) -> bool:
        return self.label == "one"

    def sup_abs(self, M: int) -> float:
        if self.is_zero:
            return 0.0
        if self.is_one:
            return 1.0
        if self.nonincreasing:
            return abs(self(M + 1))
        vals = max(abs(self(n)) for n in range(M + 1, M + _TAIL_SCAN))
        return max(vals, abs(self.limit))

    def product(self, other: "Tail") -> "Tail":
        if self.is_one:
            return other
        if other.is_one:
            return self
        if self.is_zero or other.is_zero:
            return zero_tail()
        if self.label == other.label and self._fn is other._fn:
            # same family: keep a closed power form so long products
            # stay O(1) to evaluate
            return Tail(self._fn, self.label, self.nonincreasing,
                        self.limit, self.power + other.power)
        return Tail(lambda n: self(n) * other(n),
                    f"{self.label}*{other.label}",
                    self.nonincreasing and other.nonincreasing,
                    self.limit * other.limit)


def zero_tail() -> Tail:
    return Tail(lambda n: 0.0, "zero", True)


def one_tail() -> Tail:
    return Tail(lambda n: 1.0, "one", False, limit=1.0)


def harmonic_tail() -> Tail:
    return Tail(lambda n: 1.0 / n, "harmonic", True)


def geometric_tail(q: float) -> Tail:
    if not 0.0 < q < 1.0:
        raise ValueError("geometric tail ratio must be in (0, 1)")
    return Tail(lambda n: q ** n, f"geometric({q})", True)


def tail_from_name(name: str, q: float = 0.5) -> Tail:
    return {
        "zero": zero_tail,
        "one": one_tail,
        "harmonic": harmonic_tail,
        "geometric": lambda: geometric_tail(q),
    }[name]()


def tail_abs_diff_sup(t1: Tail, t2: Tail, M: int) -> float:
    """sup_{n>M} |t1(n) - t2(n)|; exact for the built-in families."""
    if t1 is t2 or t1.label == t2.label:
        return 0.0
    vals = max(abs(t1(n) - t2(n)) for n in range(M + 1, M + _TAIL_SCAN))
    return max(vals, abs(t1.limit - t2.limit))


@dataclass
class HilbertVector:
    """A vector with an explicit head of length M plus finitely many tail
    coefficients {n: value} for n > M."""

    head: np.ndarray
    tail: dict = field(default_factory=dict)

    def norm(self) -> float:
        s = float(np.dot(self.head, self.head))
        s += sum(c * c for c in self.tail.values())
        return math.sqrt(s)


class TruncatedOperator:
    """A compact operator: dense block on coordinates 1..M, diagonal tail
    beyond."""

    def __init__(self, block: np.ndarray, tail: Tail):
        block = np.asarray(block, dtype=float)
        if block.ndim != 2 or block.shape[0] != block.shape[1]:
            raise ShapeError(f"block must be square, got {block.shape}")
        self.block = block
        self.tail = tail

    @property
    def M(self) -> int:
        return self.block.shape[0]

    def apply(self, v):
        """Apply to a length-M array or a HilbertVector."""
        if isinstance(v, HilbertVector):
            if v.head.shape != (self.M,):
                raise ShapeError(
                    f"head length {v.head.shape} does not match M={self.M}")
            for n in v.tail:
                if n <= self.M:
                    raise ShapeError(f"tail index {n} <= M={self.M}")
            return HilbertVector(self.block @ v.head,
                                 {n: self.tail(n) * c for n, c in v.tail.items()})
        v = np.asarray(v, dtype=float)
        if v.shape != (self.M,):
            raise ShapeError(f"vector length {v.shape} does not match M={self.M}")
        return self.block @ v

    def compose(self, other: "TruncatedOperator") -> "TruncatedOperator":
        """self after other  (self o other)."""
        if self.M != other.M:
            raise ShapeError(f"mixed truncation dimensions {self.M} != {other.M}")
        return TruncatedOperator(self.block @ other.block,
                                 self.tail.product(other.tail))

    def dual(self) -> "TruncatedOperator":
        return TruncatedOperator(self.block.T, self.tail)

    def norm(self) -> float:
        head = float(np.linalg.norm(self.block, 2)) if self.M else 0.0
        return max(head, self.tail.sup_abs(self.M))

    @staticmethod
    def identity(M: int) -> "TruncatedOperator":
        return TruncatedOperator(np.eye(M), one_tail())


def apply(op: TruncatedOperator, v):
    return op.apply(v)


def operator_norm(op: TruncatedOperator) -> float:
    return op.norm()


def operator_distance(a: TruncatedOperator, b: TruncatedOperator) -> float:
    """Operator norm of a - b (block-diagonal, so exact)."""
    if a.M != b.M:
        raise ShapeError("mixed truncation dimensions")
    head = float(np.linalg.norm(a.block - b.block, 2))
    return max(head, tail_abs_diff_sup(a.tail, b.tail, a.M))


# --------------------------------------------------------------------------
# splittings


def _as_frame_field(frame):
    """Normalize a constant array to a callable point -> frame."""
    if callable(frame):
        return frame
    arr = np.asarray(frame, dtype=float)
    return lambda x, _a=arr: _a


@dataclass
class SplittingSpec:
    """An (E^u, E^c) frame pair inside the first M coordinates; E^s is the
    orthogonal complement (block remainder plus the whole tail)."""

    d: int
    c: int
    u_frame: object  # (M, d) array or callable point -> array
    c_frame: object  # (M, c) array or callable point -> array

    def __post_init__(self):
        self._u = _as_frame_field(self.u_frame)
        self._c = _as_frame_field(self.c_frame)

    @property
    def D(self) -> int:
        return self.d + self.c

    def u_at(self, x) -> np.ndarray:
        return self._u(x)

    def c_at(self, x) -> np.ndarray:
        return self._c(x)

    def cu_at(self, x) -> np.ndarray:
        return np.hstack([self._u(x), self._c(x)])

    def s_block_at(self, x) -> np.ndarray:
        """Orthonormal basis of the block part of E^s at x."""
        cu = self.cu_at(x)
        M = cu.shape[0]
        q, _ = np.linalg.qr(np.hstack([cu, np.eye(M)]))
        return q[:, self.D:M]

    def validate(self, x=None, tol: float = 1e-10):
        cu = self.cu_at(x if x is not None else np.zeros(1))
        g = cu.T @ cu
        if not np.allclose(g, np.eye(self.D), atol=tol):
            raise ShapeError("splitting frames are not orthonormal")
        if self.d + self.c > cu.shape[0]:
            raise ShapeError("d + c exceeds truncation dimension")


def coordinate_splitting(M: int, d: int, c: int) -> SplittingSpec:
    """Constant splitting along the first d (+ next c) coordinate axes."""
    eye = np.eye(M)
    return SplittingSpec(d, c, eye[:, :d], eye[:, d:d + c])


# --------------------------------------------------------------------------
# cocycles


class Cocycle:
    """Map from base point to operator. Subclasses implement `at`."""

    M: int
    variant: str = "abstract"

    def at(self, x) -> TruncatedOperator:
        raise NotImplementedError


class ConstantCocycle(Cocycle):
    variant = "constant"

    def __init__(self, op: TruncatedOperator):
        self.op = op
        self.M = op.M

    def at(self, x) -> TruncatedOperator:
        return self.op


class TableCocycle(Cocycle):
    """Continuous cocycle interpolating a grid of blocks over the torus.

    The grid is periodic; interpolation is linear (circle) or bilinear
    (2-torus), so evaluation is continuous in x.
    """

    variant = "table"

    def __init__(self, grid: np.ndarray, tail: Tail):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim not in (3, 4):
            raise ShapeError("grid must be (G, M, M) or (G, G, M, M)")
        if grid.shape[-1] != grid.shape[-2]:
            raise ShapeError("grid cells must be square blocks")
        self.grid = grid
        self.tail = tail
        self.M = grid.shape[-1]

    def at(self, x) -> TruncatedOperator:
        x = basemod.as_point(x)
        if self.grid.ndim == 3:
            g = self.grid.shape[0]
            t = x[0] * g
            i = int(t) % g
            w = t - int(t)
            block = (1.0 - w) * self.grid[i] + w * self.grid[(i + 1) % g]
        else:
            g0, g1 = self.grid.shape[0], self.grid.shape[1]
            t0, t1 = x[0] * g0, x[1] * g1
            i, j = int(t0) % g0, int(t1) % g1
            u, v = t0 - int(t0), t1 - int(t1)
            block = ((1 - u) * (1 - v) * self.grid[i, j]
                     + u * (1 - v) * self.grid[(i + 1) % g0, j]
                     + (1 - u) * v * self.grid[i, (j + 1) % g1]
                     + u * v * self.grid[(i + 1) % g0, (j + 1) % g1])
        return TruncatedOperator(block, self.tail)


class RotationBumpCocycle(Cocycle):
    """B(x) v = A(x) v^s + A(x) Phi[eta_p(dist(p,x))] v^cu.

    The rotation acts in a fixed plane of the (constant) center-unstable
    frame and is supported on the ball B(p, r); outside, B = A exactly.
    """

    variant = "rotation_bump"

    def __init__(self, inner: Cocycle, params, splitting: SplittingSpec,
                 sys: basemod.BaseSystem):
        self.inner = inner
        self.params = params
        self.splitting = splitting
        self.sys = sys
        self.M = inner.M
        self._cu = splitting.cu_at(params.p)  # constant frame assumed
        self._const_block_u = None
        if isinstance(inner, ConstantCocycle):
            self._const_block_u = inner.op.block @ self._cu

    def _rotation_factor(self, eta: float) -> np.ndarray:
        from .perturb import rotation_isotopy
        return rotation_isotopy(self.params, eta, self.splitting.D)

    def at(self, x) -> TruncatedOperator:
        from .perturb import bump
        a = self.inner.at(x)
        eta = bump(self.params, self.sys, x)
        if eta == 0.0:
            return a
        r = self._rotation_factor(eta)
        u = self._cu
        au = self._const_block_u if self._const_block_u is not None else a.block @ u
        # A (I + U (R - I) U^T) = A + (A U)(R - I) U^T : rank-D update
        block = a.block + (au @ (r - np.eye(self.splitting.D))) @ u.T
        return TruncatedOperator(block, a.tail)


class CentralScalingCocycle(Cocycle):
    """C(x) = B(x) (I + U_c (diag(factors) - I) U_c^T): scales each central
    frame direction by a constant factor, everywhere on X."""

    variant = "central_scaling"

    def __init__(self, inner: Cocycle, factors, splitting: SplittingSpec):
        self.inner = inner
        self.factors = np.asarray(factors, dtype=float)
        self.splitting = splitting
        if self.factors.shape != (splitting.c,):
            raise ShapeError("one scaling factor per central direction required")
        self.M = inner.M
        uc = splitting.c_at(np.zeros(1))  # constant frame assumed
        self._scale = np.eye(self.M) + uc @ np.diag(self.factors - 1.0) @ uc.T

    def at(self, x) -> TruncatedOperator:
        a = self.inner.at(x)
        return TruncatedOperator(a.block @ self._scale, a.tail)


def cocycle_product(A: Cocycle, sys: basemod.BaseSystem, x, n: int) -> TruncatedOperator:
    """A^n(x) = A(f^{n-1} x) o ... o A(x); A^0 = id."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = TruncatedOperator.identity(A.M)
    for xj in basemod.orbit(sys, x, n):
        out = A.at(xj).compose(out)
    return out


def integrability_estimate(A: Cocycle, sys: basemod.BaseSystem,
                           seed: int, count: int) -> float:
    """Monte Carlo estimate of the log+ norm average over the measure."""
    if count < 100:
        raise ValueError("count must be >= 100")
    pts = basemod.sample_measure(sys, seed, count)
    total = 0.0
    for x in pts:
        total += max(0.0, math.log(A.at(x).norm()))
    return total / count
