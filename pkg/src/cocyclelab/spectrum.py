"""Lyapunov spectra, Oseledets data and center-unstable entropy.

Two independent routes to the exponents are provided: QR with per-step
reorthonormalization (the workhorse for long horizons) and singular values
of the explicitly accumulated product (the short-horizon oracle, switching
to high-precision arithmetic when the dynamic range exceeds double
precision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import base as basemod
from . import operator as opmod
from .errors import FrameCollapseError, RankLossError, ShapeError

NEG_INF = float("-inf")

# per-step average log-norm below which a direction is declared a -inf
# exponent (floating point cannot represent the true limit)
UNDERFLOW_RATE = -30.0

# absolute gap below which two finite-horizon exponents are treated as
# unresolved / belonging to one Oseledets block
DEFAULT_GAP_TOL = 1e-3


@dataclass
class LyapunovSpectrum:
    """Sorted exponents with multiplicities plus a tail description."""

    entries: list  # [(lambda_i, n_i)], strictly decreasing lambda_i
    tail_rule: str = ""
    head_count: int = 0

    @classmethod
    def from_exponents(cls, values, gap_tol: float = DEFAULT_GAP_TOL,
                       tail_rule: str = "") -> "LyapunovSpectrum":
        vals = sorted(float(v) for v in np.asarray(values).ravel())[::-1]
        entries = []
        for v in vals:
            if entries and entries[-1][0] - v <= gap_tol:
                lam, n = entries[-1]
                entries[-1] = ((lam * n + v) / (n + 1), n + 1)
            else:
                entries.append((v, 1))
        return cls(entries=entries, tail_rule=tail_rule, head_count=len(vals))

    def flat(self) -> list:
        """Exponents repeated with multiplicity, decreasing."""
        return [lam for lam, n in self.entries for _ in range(n)]


@dataclass
class QRRun:
    """Result of a QR-reorthonormalization sweep along one orbit."""

    exponents: np.ndarray          # running averages at horizon n
    half_exponents: np.ndarray     # running averages at n // 2
    n: int
    trace: np.ndarray              # (checkpoints, 1 + k): step, averages

    @property
    def cauchy_gap(self) -> float:
        return float(np.max(np.abs(self.exponents - self.half_exponents)))


def lyapunov_qr(A: opmod.Cocycle, sys: basemod.BaseSystem, x0, n: int, k: int,
                q0: Optional[np.ndarray] = None, checkpoints: int = 20) -> QRRun:
    """Leading k Lyapunov exponents by pushing an orthonormal k-frame and
    accumulating the logs of the R-diagonal."""
    if not 1 <= k <= A.M:
        raise ShapeError(f"k={k} outside 1..M={A.M}")
    if n < 10:
        raise ValueError("n must be >= 10")
    q = np.eye(A.M)[:, :k] if q0 is None else np.array(q0, dtype=float)
    if q.shape != (A.M, k):
        raise ShapeError("q0 must be an (M, k) frame")
    sums = np.zeros(k)
    half = np.zeros(k)
    every = max(1, n // checkpoints)
    trace = []
    x = basemod.as_point(x0)
    for j in range(n):
        w = A.at(x).block @ q
        q, r = np.linalg.qr(w)
        diag = np.abs(np.diag(r))
        if np.any(diag < 1e-300):
            bad = int(np.argmin(diag))
            raise FrameCollapseError(j, float(diag[bad]))
        q = q * np.sign(np.diag(r))
        sums += np.log(diag)
        if j + 1 == n // 2:
            half = sums / (n // 2)
        if (j + 1) % every == 0 or j + 1 == n:
            trace.append([j + 1, *(sums / (j + 1))])
        x = basemod.step(sys, x, 1)
    return QRRun(exponents=sums / n, half_exponents=half, n=n,
                 trace=np.asarray(trace))


# --------------------------------------------------------------------------
# SVD-of-product oracle


@dataclass
class SingularExponents:
    """(1/n) log sigma_j of A^n(x0), plus how the tail behaves."""

    head: np.ndarray
    n: int
    tail_rule: str


def _product_dps(spread: float, n: int) -> int:
    return int(1.2 * n * max(spread, 0.1) / math.log(10.0)) + 50


def limit_operator_svd(A: opmod.Cocycle, sys: basemod.BaseSystem, x0,
                       n: int, chunk: int = 8) -> SingularExponents:
    """Singular exponents of the explicit product A^n(x0).

    Diagonal products are handled exactly. Otherwise the product is
    accumulated in chunks of `chunk` steps in double precision and folded
    into a high-precision accumulator sized from a cheap QR pre-pass, so
    no rescaling or overflow handling is needed downstream.
    """
    tail0 = A.at(x0).tail
    tail_rule = "-inf beyond block" if tail0.is_zero else \
        f"(1/n) log of {tail0.label} tail products"

    # Exact path: when every step is diagonal the singular values are the
    # absolute diagonal products, so accumulate their logs directly.
    x = basemod.as_point(x0)
    logs = np.zeros(A.M)
    diagonal = True
    for _ in range(n):
        blk = A.at(x).block
        if np.any(blk != np.diag(np.diag(blk))):
            diagonal = False
            break
        logs += np.log(np.abs(np.diag(blk)))
        x = basemod.step(sys, x, 1)
    if diagonal:
        head = np.sort(logs)[::-1] / n
        return SingularExponents(head=head, n=n, tail_rule=tail_rule)

    import mpmath

    pre = lyapunov_qr(A, sys, x0, max(200, min(n, 400)), A.M)
    spread = float(pre.exponents[0] - pre.exponents[-1])
    mpmath.mp.dps = _product_dps(spread, n)
    try:
        acc = mpmath.eye(A.M)
        x = basemod.as_point(x0)
        done = 0
        while done < n:
            m = min(chunk, n - done)
            block = np.eye(A.M)
            for _ in range(m):
                block = A.at(x).block @ block
                x = basemod.step(sys, x, 1)
            acc = mpmath.matrix(block.tolist()) * acc
            done += m
        sigmas = mpmath.svd_r(acc, compute_uv=False)
        head = np.array(sorted((float(mpmath.log(s)) / n for s in sigmas),
                               reverse=True))
    finally:
        mpmath.mp.dps = 15
    return SingularExponents(head=head, n=n, tail_rule=tail_rule)


def vector_exponent(A: opmod.Cocycle, sys: basemod.BaseSystem, x0, v,
                    n: int) -> float:
    """(1/n) log ||A^n(x0) v|| with log-rescaled accumulation.

    Returns -inf when the running rate falls below the underflow floor.
    """
    if isinstance(v, np.ndarray):
        v = opmod.HilbertVector(np.array(v, dtype=float))
    else:
        v = opmod.HilbertVector(np.array(v.head, dtype=float), dict(v.tail))
    nv = v.norm()
    if not math.isclose(nv, 1.0, rel_tol=1e-9):
        raise ValueError("v must be a unit vector")
    logsum = 0.0
    x = basemod.as_point(x0)
    for j in range(n):
        v = A.at(x).apply(v)
        nv = v.norm()
        if nv == 0.0 or logsum + math.log(nv) < UNDERFLOW_RATE * n:
            return NEG_INF
        logsum += math.log(nv)
        v = opmod.HilbertVector(v.head / nv, {i: c / nv for i, c in v.tail.items()})
        x = basemod.step(sys, x, 1)
    return logsum / n


# --------------------------------------------------------------------------
# Oseledets frames


@dataclass
class OseledetsFrames:
    x: np.ndarray
    n: int
    U_frames: list          # orthonormal bases per requested group
    V_flags: list           # nested filtration as cumulative spans
    exponents: np.ndarray   # singular exponents backing the grouping
    unresolved: bool = False


def oseledets_frames(A: opmod.Cocycle, sys: basemod.BaseSystem, x0, n: int,
                     dims) -> OseledetsFrames:
    """Finite-time Oseledets data from the SVD of A^n(x0).

    Right-singular groups approximate the eigenspaces of the limit operator
    at x0; cumulative right-singular spans from each group onward
    approximate the filtration.
    """
    dims = [int(d) for d in dims]
    if sum(dims) > A.M:
        raise ShapeError("sum of requested dimensions exceeds M")
    prod = opmod.cocycle_product(A, sys, x0, n)
    # gesvd: the default divide-and-conquer driver loses all accuracy on
    # products whose singular values span hundreds of orders of magnitude
    import scipy.linalg

    _, s, vt = scipy.linalg.svd(prod.block, lapack_driver="gesvd")
    s = np.where(s > 0, s, 1e-300)
    expo = np.log(s) / n
    cuts = np.cumsum(dims)
    unresolved = any(
        expo[c - 1] - expo[c] < DEFAULT_GAP_TOL for c in cuts if c < len(expo))
    u_frames = []
    start = 0
    for d in dims:
        u_frames.append(vt[start:start + d].T.copy())
        start += d
    v_flags = [vt[s0:].T.copy() for s0 in [0, *cuts[:-1]]]
    return OseledetsFrames(x=basemod.as_point(x0), n=n, U_frames=u_frames,
                           V_flags=v_flags, exponents=expo,
                           unresolved=unresolved)


def covariant_frame_field(A: opmod.Cocycle, sys: basemod.BaseSystem,
                          split: opmod.SplittingSpec, x0, horizon: int,
                          spin_up: int = 200):
    """Covariant (u, c) frames along an orbit, inside the invariant
    center-unstable block of `split`.

    The u-frames come from a forward QR push (prefix spans of the pushed
    frame are exactly covariant); the c-frames from a backward pull with
    the inverse of the restricted block (covariant by construction, and
    converging to the slow filtration). Returns (points, u_frames,
    c_frames) arrays over the window [spin_up, spin_up + horizon).
    """
    d, c, D = split.d, split.c, split.D
    cu = split.cu_at(x0)  # constant invariant frame assumed
    total = spin_up + horizon + spin_up
    pts = np.empty((total, sys.dim))
    restricted = np.empty((total, D, D))
    x = basemod.as_point(x0)
    for j in range(total):
        pts[j] = x
        restricted[j] = cu.T @ A.at(x).block @ cu
        x = basemod.step(sys, x, 1)

    # forward pass: backward Lyapunov frame, first d columns span E^u
    q = np.eye(D)
    u_frames = np.empty((horizon, D, d))
    for j in range(spin_up + horizon - 1):
        q, r = np.linalg.qr(restricted[j] @ q)
        q = q * np.sign(np.diag(r))
        if 0 <= j + 1 - spin_up < horizon:
            u_frames[j + 1 - spin_up] = q[:, :d]
    if spin_up == 0:
        u_frames[0] = np.eye(D)[:, :d]

    # backward pass: pull a c-frame with the inverse restriction
    w = np.eye(D)[:, d:D]
    c_frames = np.empty((horizon, D, c))
    for j in range(total - 1, spin_up - 1, -1):
        try:
            w = np.linalg.solve(restricted[j], w)
        except np.linalg.LinAlgError as exc:
            raise RankLossError(
                f"restricted block singular at orbit step {j}") from exc
        w, _ = np.linalg.qr(w)
        if spin_up <= j < spin_up + horizon:
            c_frames[j - spin_up] = w

    return (pts[spin_up:spin_up + horizon],
            np.einsum("mk,jkl->jml", cu, u_frames),
            np.einsum("mk,jkl->jml", cu, c_frames))


# --------------------------------------------------------------------------
# entropy


@dataclass
class EntropyReport:
    birkhoff: float
    spectral: float
    horizon: int
    spectral_exponents: np.ndarray = field(default=None)

    @property
    def discrepancy(self) -> float:
        return abs(self.birkhoff - self.spectral)


def det_rate(A: opmod.Cocycle, sys: basemod.BaseSystem, bundle_frames, x0,
             n: int) -> float:
    """Birkhoff average of log |det| of A restricted to an invariant frame
    field, via Gram determinants of the image vectors."""
    frame = opmod._as_frame_field(bundle_frames)
    total = 0.0
    x = basemod.as_point(x0)
    for j in range(n):
        y = A.at(x).block @ frame(x)
        g = y.T @ y
        sign, logdet = np.linalg.slogdet(g)
        if sign <= 0 or logdet < -690:  # Gram determinant underflow
            raise RankLossError(f"degenerate image frame at step {j}")
        total += 0.5 * logdet
        x = basemod.step(sys, x, 1)
    return total / n


def cu_entropy(A: opmod.Cocycle, sys: basemod.BaseSystem,
               split: opmod.SplittingSpec, x0, n: int) -> EntropyReport:
    """Center-unstable entropy two ways: Birkhoff average of the restricted
    log-determinant, and the sum of the leading D exponents from QR."""
    if split.D < 1:
        raise ShapeError("center-unstable dimension must be >= 1")
    birkhoff = det_rate(A, sys, split.cu_at, x0, n)
    run = lyapunov_qr(A, sys, x0, n, split.D, q0=split.cu_at(x0))
    return EntropyReport(birkhoff=birkhoff,
                         spectral=float(np.sum(run.exponents)),
                         horizon=n,
                         spectral_exponents=run.exponents)
