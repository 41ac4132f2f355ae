"""Empirical certification of dominated sums and partial hyperbolicity.

Certificates are sampled evidence, not proofs: the universally quantified
conditions are checked over measure draws plus an orbit segment, with the
extremal witness recorded so any failure can be replayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import base as basemod
from . import operator as opmod
from .errors import IncompleteEvidenceError, ShapeError
from .spectrum import LyapunovSpectrum

DEFAULT_MEASURE_SAMPLES = 1000
DEFAULT_ORBIT_SAMPLES = 10_000
INVARIANCE_DRIFT_TOL = 1e-3


def fibonacci_sphere(count: int) -> np.ndarray:
    """Deterministic unit directions on S^2."""
    i = np.arange(count) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def direction_grid(dim: int, seed: int = 0, fine: int = 64,
                   coarse: int = 512) -> np.ndarray:
    """Unit directions in R^dim: deterministic grids for dim <= 3, seeded
    uniform otherwise. Shape (count, dim)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        t = np.linspace(0.0, 2.0 * math.pi, fine, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if dim == 3:
        return fibonacci_sphere(fine)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(coarse, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class Witness:
    """The extremal (point, unit vector pair) seen during certification."""

    point: list
    u: list            # direction in E2 (coefficients in the E2 frame)
    v: list            # direction in E1
    ratio: float
    witness_id: str = "worst"


@dataclass
class SplittingCertificate:
    ell: int
    alpha: float
    theta: float
    gamma: float
    dims: tuple
    samples: int
    passed: bool
    worst_witness: Optional[Witness]
    violations: list = field(default_factory=list)
    pair: str = ""


@dataclass
class Bundle:
    """A subbundle given by a block frame field, optionally including the
    whole diagonal tail (for E^s)."""

    frame: object            # (M, k) array or callable point -> array
    includes_tail: bool = False

    def __post_init__(self):
        self._f = opmod._as_frame_field(self.frame)

    def at(self, x) -> np.ndarray:
        return self._f(x)

    @property
    def dim_block(self) -> int:
        return self.at(np.zeros(2)).shape[1]


def _tail_sup_over_steps(A: opmod.Cocycle, sys, x, ell: int) -> float:
    prod = opmod.cocycle_product(A, sys, x, ell)
    return prod.tail.sup_abs(A.M)


def _pair_extremes(A: opmod.Cocycle, sys, x, e1: Bundle, e2: Bundle, ell: int):
    """Exact extremes over unit vectors at one sample point:
    (sup ||A^l u||, inf ||A^l v||, inf ||A(x) v||)."""
    prod = opmod.cocycle_product(A, sys, x, ell)
    w2 = prod.block @ e2.at(x)
    sup_u = float(np.linalg.norm(w2, 2)) if w2.size else 0.0
    if e2.includes_tail:
        sup_u = max(sup_u, _tail_sup_over_steps(A, sys, x, ell))
    w1 = prod.block @ e1.at(x)
    inf_v = float(np.linalg.svd(w1, compute_uv=False)[-1])
    one = A.at(x).block @ e1.at(x)
    theta_x = float(np.linalg.svd(one, compute_uv=False)[-1])
    return sup_u, inf_v, theta_x


def _min_principal_angle(f1: np.ndarray, f2: np.ndarray) -> float:
    s = np.linalg.svd(f1.T @ f2, compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    return float(np.arccos(s[0]))


def _sample_points(sys, seed: int, measure_count: int, orbit_len: int,
                   x0=None) -> np.ndarray:
    pts = basemod.sample_measure(sys, seed, measure_count)
    if orbit_len > 0:
        start = pts[0] if x0 is None else basemod.as_point(x0)
        orb = np.array(list(basemod.orbit(sys, start, orbit_len)))
        pts = np.vstack([pts, orb])
    return pts


def tightest_constants(A: opmod.Cocycle, sys: basemod.BaseSystem,
                       e1: Bundle, e2: Bundle, ell: int, seed: int = 0,
                       samples: int = DEFAULT_MEASURE_SAMPLES,
                       orbit_len: int = 0):
    """Extremal (alpha*, theta*, gamma*) over the sampled points.

    alpha* is the worst ratio sup ||A^l u|| / inf ||A^l v||; theta* the
    smallest one-step norm on E1; gamma* the smallest principal angle
    between the bundles.
    """
    pts = _sample_points(sys, seed, samples, orbit_len)
    alpha = -math.inf
    theta = math.inf
    gamma = math.inf
    for x in pts:
        sup_u, inf_v, theta_x = _pair_extremes(A, sys, x, e1, e2, ell)
        alpha = max(alpha, sup_u / inf_v if inf_v > 0 else math.inf)
        theta = min(theta, theta_x)
        ang = _min_principal_angle(e1.at(x), e2.at(x))
        if e2.includes_tail:
            ang = min(ang, math.pi / 2.0)
        gamma = min(gamma, ang)
    return alpha, theta, gamma


def check_domination(A: opmod.Cocycle, sys: basemod.BaseSystem,
                     e1: Bundle, e2: Bundle, ell: int, alpha: float,
                     theta: float, seed: int = 0,
                     samples: int = DEFAULT_MEASURE_SAMPLES,
                     orbit_len: int = DEFAULT_ORBIT_SAMPLES,
                     check_invariance: bool = True,
                     pair: str = "") -> SplittingCertificate:
    """Certify an (ell, alpha)-dominated sum over sampled points.

    Checks invariance of both bundles under one push (principal-angle
    drift), constancy of dimensions, the norm floor on E1 and the
    direction-grid ratio condition. PASS iff no violation.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if theta <= 0 or ell < 1:
        raise ValueError("theta > 0 and ell >= 1 required")
    f1, f2 = e1.at(np.zeros(2)), e2.at(np.zeros(2))
    if _min_principal_angle(f1, f2) < 1e-9 and not e2.includes_tail:
        raise ShapeError("bundles are not independent")

    pts = _sample_points(sys, seed, samples, orbit_len)
    dirs1 = direction_grid(e1.dim_block, seed=seed)
    dirs2 = direction_grid(e2.dim_block, seed=seed + 1)
    violations = []
    worst = None
    for x in pts:
        if check_invariance:
            for bundle, name in ((e1, "E1"), (e2, "E2")):
                pushed = A.at(x).block @ bundle.at(x)
                q, _ = np.linalg.qr(pushed)
                drift = _min_over_drift(q, bundle.at(basemod.step(sys, x, 1)))
                if drift > INVARIANCE_DRIFT_TOL:
                    violations.append(
                        {"kind": "invariance", "bundle": name,
                         "point": x.tolist(), "drift": drift})
        prod = opmod.cocycle_product(A, sys, x, ell)
        v_img = prod.block @ (e1.at(x) @ dirs1.T)       # (M, n1)
        u_img = prod.block @ (e2.at(x) @ dirs2.T)       # (M, n2)
        v_norms = np.linalg.norm(v_img, axis=0)
        u_norms = np.linalg.norm(u_img, axis=0)
        if e2.includes_tail:
            u_norms = np.append(u_norms, _tail_sup_over_steps(A, sys, x, ell))
        one_norms = np.linalg.norm(A.at(x).block @ (e1.at(x) @ dirs1.T), axis=0)
        if np.min(one_norms) < theta:
            violations.append({"kind": "III.1", "point": x.tolist(),
                               "norm": float(np.min(one_norms))})
        ratio = float(np.max(u_norms)) / float(np.min(v_norms)) \
            if np.min(v_norms) > 0 else math.inf
        if worst is None or ratio > worst.ratio:
            iu = int(np.argmax(u_norms))
            iv = int(np.argmin(v_norms))
            u_dir = dirs2[iu].tolist() if iu < len(dirs2) else ["tail"]
            worst = Witness(point=x.tolist(), u=u_dir,
                            v=dirs1[iv].tolist(), ratio=ratio)
        if ratio > alpha:
            violations.append({"kind": "III.2", "point": x.tolist(),
                               "ratio": ratio})
    passed = not violations
    return SplittingCertificate(
        ell=ell, alpha=alpha, theta=theta,
        gamma=min(_min_principal_angle(e1.at(x), e2.at(x)) for x in pts[:64]),
        dims=(e1.dim_block, e2.dim_block), samples=len(pts), passed=passed,
        worst_witness=worst, violations=violations[:32], pair=pair)


def _min_over_drift(pushed_q: np.ndarray, target: np.ndarray) -> float:
    """Largest principal angle between the pushed span and the target span."""
    s = np.clip(np.linalg.svd(pushed_q.T @ target, compute_uv=False), -1.0, 1.0)
    return float(np.arccos(s[-1]))


def finest_search(A: opmod.Cocycle, sys: basemod.BaseSystem,
                  cu_frames, ell: int, gap_tol: float, seed: int = 0,
                  samples: int = 200) -> list:
    """Finest ordered partition of a D-dimensional bundle into dominated
    blocks: greedily split wherever the (p, D-p) sum is (ell, alpha)
    dominated for some alpha <= 1 - gap_tol, then recurse."""
    frames = opmod._as_frame_field(cu_frames)
    D = frames(np.zeros(2)).shape[1]
    if D > 8:
        raise ShapeError("finest_search limited to D <= 8")

    def dominated_at(lo, mid, hi):
        e1 = Bundle(lambda x: frames(x)[:, lo:mid])
        e2 = Bundle(lambda x: frames(x)[:, mid:hi])
        alpha, theta, _ = tightest_constants(A, sys, e1, e2, ell,
                                             seed=seed, samples=samples)
        return alpha <= 1.0 - gap_tol and theta > 0.0

    def split(lo, hi):
        for p in range(lo + 1, hi):
            if dominated_at(lo, p, hi):
                return split(lo, p) + split(p, hi)
        return [hi - lo]

    return split(0, D)


@dataclass
class PHClassification:
    d: int
    c: int
    ell: int
    alpha: float
    beta: float
    verdict: str
    reason: str = ""


def classify_ph(spectrum: LyapunovSpectrum, certificates: list,
                zero_gap: float = 1e-2) -> PHClassification:
    """Classify a spectrum plus domination certificates per the three-bundle
    splitting: d counts exponents above the zero gap, c those inside it."""
    by_pair = {cert.pair: cert for cert in certificates}
    for pair in ("u,c", "c,s"):
        if pair not in by_pair:
            raise IncompleteEvidenceError(f"missing certificate for ({pair})")
    uc, cs = by_pair["u,c"], by_pair["c,s"]
    d = sum(n for lam, n in spectrum.entries if lam > zero_gap)
    c = sum(n for lam, n in spectrum.entries if abs(lam) <= zero_gap)
    ell = uc.ell
    alpha, beta = uc.alpha, cs.alpha
    if d == 0:
        return PHClassification(d, c, ell, alpha, beta, "fail",
                                "no positive exponents: trivial unstable bundle")
    if not (uc.passed and cs.passed):
        return PHClassification(d, c, ell, alpha, beta, "fail",
                                "domination certificate failed")
    if c == 0:
        return PHClassification(d, c, ell, alpha, beta, "non_uniformly_anosov")
    return PHClassification(d, c, ell, alpha, beta, "partially_hyperbolic")


class _BlockPerturbedCocycle(opmod.Cocycle):
    """A + delta * G with G a fixed unit-spectral-norm block."""

    variant = "block_perturbed"

    def __init__(self, inner: opmod.Cocycle, g: np.ndarray, delta: float):
        self.inner = inner
        self.M = inner.M
        self._shift = delta * g

    def at(self, x):
        a = self.inner.at(x)
        return opmod.TruncatedOperator(a.block + self._shift, a.tail)


def persistence_probe(A: opmod.Cocycle, sys: basemod.BaseSystem,
                      e1: Bundle, e2: Bundle, ell: int,
                      perturbation_magnitudes, seed: int = 0,
                      samples: int = 200, trials: int = 4) -> list:
    """Re-check the domination inequalities (III) on the original frames
    after random block perturbations of each magnitude.

    Only the norm conditions are re-checked: a generic perturbation moves
    the invariant bundles, and persistence concerns the inequalities, not
    the frozen frames. Besides `trials` random unit-spectral-norm
    directions, one adversarial direction is always probed: inflate E2
    while deflating E1, which realizes the worst-case drifted ratio
    (sup + delta) / (inf - delta). Rows: (delta, PASS, drifted alpha*).
    """
    rng = np.random.default_rng(seed)
    f1 = e1.at(np.zeros(2))
    f2 = e2.at(np.zeros(2))
    adversarial = f2[:, :1] @ f2[:, :1].T - f1[:, :1] @ f1[:, :1].T
    adversarial /= np.linalg.norm(adversarial, 2)
    rows = []
    for delta in perturbation_magnitudes:
        worst_alpha = -math.inf
        ok = True
        directions = [adversarial] + \
            [rng.normal(size=(A.M, A.M)) for _ in range(trials)]
        for g in directions:
            g = g / np.linalg.norm(g, 2)
            pert = _BlockPerturbedCocycle(A, g, float(delta))
            alpha, theta, _ = tightest_constants(pert, sys, e1, e2, ell,
                                                 seed=seed, samples=samples)
            worst_alpha = max(worst_alpha, alpha)
            if alpha >= 1.0 or theta <= 0.0:
                ok = False
        rows.append({"delta": float(delta), "passed": ok,
                     "alpha": worst_alpha})
    return rows
