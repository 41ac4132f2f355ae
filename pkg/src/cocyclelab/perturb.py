"""The two perturbation procedures and their verification harness.

First procedure: a bump-supported rotation in the center-unstable bundle,
active only in a small ball around a non-periodic point. It trades
unstable growth for central growth while conserving the center-unstable
entropy. Second procedure: explicit diagonal scaling of the central frame
directions, equalizing the central exponents and pushing them off zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import base as basemod
from . import operator as opmod
from . import spectrum as specmod
from .errors import ParameterError, RankLossError, InsufficientHorizonError


@dataclass
class PerturbationParams:
    p: np.ndarray                # bump center, dense-orbit non-periodic
    r: float                     # ball radius
    inner_fraction: float        # eta = 1 inside inner_fraction * r
    omega: float                 # rotation angle in (0, pi/2)
    plane: tuple = (0, 1)        # (unstable index, central index) in the cu frame
    delta: float = 0.0           # computed closeness bound
    epsilon: float = 0.0         # C0 budget the bound was derived from

    def __post_init__(self):
        self.p = basemod.as_point(self.p)
        if not 0.0 < self.inner_fraction < 1.0:
            raise ParameterError("inner_fraction must lie in (0, 1)")
        if not 0.0 < self.omega < math.pi / 2.0:
            raise ParameterError("omega must lie in (0, pi/2)")
        if self.r <= 0.0:
            raise ParameterError("r must be positive")

    @property
    def Delta(self) -> float:
        return math.cos(self.omega)

    @property
    def isotopy_distance(self) -> float:
        """||id - Phi(1)|| = 2 sin(omega / 2)."""
        return 2.0 * math.sin(self.omega / 2.0)


def bump(params: PerturbationParams, sys: basemod.BaseSystem, x) -> float:
    """Piecewise-linear bump in dist(p, x): 1 inside the inner core, 0
    outside the ball."""
    d = basemod.distance(sys, params.p, x)
    inner = params.inner_fraction * params.r
    if d <= inner:
        return 1.0
    if d >= params.r:
        return 0.0
    return (params.r - d) / (params.r - inner)


def rotation_isotopy(params: PerturbationParams, t: float, D: int) -> np.ndarray:
    """Rotation by t * omega in the chosen plane of R^D, identity elsewhere."""
    i, j = params.plane
    if not (0 <= i < D and 0 <= j < D and i != j):
        raise ParameterError(f"plane {params.plane} invalid for D={D}")
    th = t * params.omega
    rot = np.eye(D)
    rot[i, i] = rot[j, j] = math.cos(th)
    rot[i, j] = -math.sin(th)
    rot[j, i] = math.sin(th)
    return rot


def ball_disjointness_ok(params: PerturbationParams, sys: basemod.BaseSystem,
                         resolution_factor: float = 0.01) -> bool:
    """Grid check that B(p,r) is disjoint from its image and preimage."""
    step_count = max(8, int(2.0 / resolution_factor))
    if sys.dim == 1:
        offsets = np.linspace(-params.r, params.r, step_count)
        pts = (params.p[0] + offsets) % 1.0
        pts = pts[:, None]
    else:
        side = int(math.sqrt(step_count)) + 1
        g = np.linspace(-params.r, params.r, side)
        xx, yy = np.meshgrid(g, g)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        pts = (params.p + pts[np.hypot(xx.ravel(), yy.ravel()) <= params.r]) % 1.0
    for k in (1, -1):
        for x in pts:
            if basemod.distance(sys, basemod.step(sys, x, k), params.p) < params.r:
                return False
    return True


def delta_bound(A: opmod.Cocycle, split: opmod.SplittingSpec, eps: float,
                sys: Optional[basemod.BaseSystem] = None, seed: int = 0,
                samples: int = 256) -> float:
    """delta = eps / sup ||A restricted to E^cu|| over sampled points."""
    if eps <= 0.0:
        raise ParameterError("eps must be positive")
    if sys is None or isinstance(A, opmod.ConstantCocycle):
        pts = [np.zeros(2)]
    else:
        pts = basemod.sample_measure(sys, seed, samples)
    sup = 0.0
    for x in pts:
        w = A.at(x).block @ split.cu_at(x)
        svals = np.linalg.svd(w, compute_uv=False)
        if svals[-1] < 1e-12:
            raise RankLossError(
                "restriction to E^cu not invertible (some exponent -inf inside E^cu)")
        sup = max(sup, float(svals[0]))
    return eps / sup


def max_rotation_angle(delta: float) -> float:
    """Largest omega with 2 sin(omega/2) <= delta."""
    return 2.0 * math.asin(min(1.0, delta / 2.0))


def perturb_cu(A: opmod.Cocycle, split: opmod.SplittingSpec,
               params: PerturbationParams,
               sys: basemod.BaseSystem) -> opmod.RotationBumpCocycle:
    """Build the bump-rotated cocycle B from A; E^s and E^cu stay invariant
    by construction."""
    if split.d < 1:
        raise ParameterError("unstable bundle must be non-trivial (d >= 1)")
    if params.delta > 0.0 and params.isotopy_distance > params.delta * (1 + 1e-12):
        raise ParameterError(
            f"rotation too large: 2 sin(omega/2) = {params.isotopy_distance:.4g} "
            f"> delta = {params.delta:.4g}")
    if not ball_disjointness_ok(params, sys):
        raise ParameterError(
            "B(p,r) meets its image or preimage; choose a smaller r")
    return opmod.RotationBumpCocycle(A, params, split, sys)


def choose_center(sys: basemod.BaseSystem, seed: int = 0,
                  period_bound: int = 20, tol: float = 1e-9) -> np.ndarray:
    """A measure sample forced off the periodic set (f^k(p) != p, k <= bound)."""
    for candidate in basemod.sample_measure(sys, seed, 64):
        x = candidate
        ok = True
        for _ in range(period_bound):
            x = basemod.step(sys, x, 1)
            if basemod.distance(sys, x, candidate) < tol:
                ok = False
                break
        if ok:
            return candidate
    raise ParameterError("no non-periodic center found")


# --------------------------------------------------------------------------
# verification harness


@dataclass
class PerturbationReport:
    equal_outside_ball: bool
    stable_action_preserved: bool
    rotation_form_verified: bool
    norm_distance: float
    norm_budget: float
    entropy_before: float
    entropy_after: float
    entropy_gap: float
    central_sum_before: float
    central_sum_after: float
    unstable_before: float
    unstable_after: float
    observed_drop: float
    predicted_drop_full: float       # -ln(Delta)
    predicted_drop_kac: float        # -visit_fraction * ln(Delta)
    visit_fraction: float
    mean_return: float
    horizon: int
    verdict: str = ""
    failures: list = field(default_factory=list)


def _exact_item_checks(A, B, sys, split, params, seed, samples=200):
    """Items (i), (2i), (3i): definitional identities, machine precision."""
    rng = np.random.default_rng(seed)
    pts = basemod.sample_measure(sys, seed, samples)
    eq_outside = True
    stable_ok = True
    rotation_ok = True
    for x in pts:
        a, b = A.at(x), B.at(x)
        dist_p = basemod.distance(sys, params.p, x)
        if dist_p >= params.r:
            if opmod.operator_distance(a, b) > 1e-13:
                eq_outside = False
        # stable action: block s-frame directions and one tail coordinate
        s_frame = split.s_block_at(x)
        if s_frame.size:
            v = s_frame @ rng.normal(size=s_frame.shape[1])
            v /= np.linalg.norm(v)
            if np.linalg.norm(a.apply(v) - b.apply(v)) > 1e-12:
                stable_ok = False
        hv = opmod.HilbertVector(np.zeros(A.M), {A.M + 3: 1.0})
        da = a.apply(hv).tail[A.M + 3]
        db = b.apply(hv).tail[A.M + 3]
        if abs(da - db) > 1e-15:
            stable_ok = False
        # rotation form on E^cu: B(x) U = A(x) U R(eta)
        eta = bump(params, sys, x)
        rot = rotation_isotopy(params, eta, split.D)
        cu = split.cu_at(x)
        lhs = b.block @ cu
        rhs = a.block @ cu @ rot
        if np.max(np.abs(lhs - rhs)) > 1e-12:
            rotation_ok = False
        if abs(np.linalg.det(rot) - 1.0) > 1e-12:
            rotation_ok = False
    return eq_outside, stable_ok, rotation_ok


def verify_lemma(A: opmod.Cocycle, B: opmod.Cocycle, sys: basemod.BaseSystem,
                 split: opmod.SplittingSpec, params: PerturbationParams,
                 n: int, seed: int = 0, x0=None) -> PerturbationReport:
    """Check every item of the center-unstable perturbation lemma on one
    orbit, and report the observed unstable-exponent drop against the two
    candidate predictions (see the report fields)."""
    if x0 is None:
        x0 = basemod.sample_measure(sys, seed + 7, 1)[0]
    eq, stable, rot = _exact_item_checks(A, B, sys, split, params, seed)

    # (4i): sampled C0 distance
    pts = basemod.sample_measure(sys, seed + 1, 400)
    pts = np.vstack([pts, [params.p % 1.0]])
    norm_dist = max(opmod.operator_distance(A.at(x), B.at(x)) for x in pts)
    budget = params.epsilon if params.epsilon > 0 else math.inf

    # (5i)/(6i): dual-path entropies; exponents reused for the drop
    ent_a = specmod.cu_entropy(A, sys, split, x0, n)
    ent_b = specmod.cu_entropy(B, sys, split, x0, n)
    lam_a = np.sort(ent_a.spectral_exponents)[::-1]
    lam_b = np.sort(ent_b.spectral_exponents)[::-1]
    d = split.d
    unstable_a, unstable_b = float(np.sum(lam_a[:d])), float(np.sum(lam_b[:d]))
    central_a, central_b = float(np.sum(lam_a[d:])), float(np.sum(lam_b[d:]))
    drop = unstable_a - unstable_b

    stats = basemod.return_time_stats(sys, params.p, params.r, x0, min(n, 100_000))
    pred_full = -math.log(params.Delta)
    pred_kac = stats.visit_fraction * pred_full

    failures = []
    if not eq:
        failures.append("item (i): B != A outside the ball")
    if not stable:
        failures.append("item (2i): stable action changed")
    if not rot:
        failures.append("item (3i): cu action is not A o rotation")
    if norm_dist > budget + 1e-12:
        failures.append(f"item (4i): ||A-B|| = {norm_dist:.4g} > {budget:.4g}")
    if ent_a.discrepancy > 1e-2 or ent_b.discrepancy > 1e-2:
        failures.append("entropy dual-path discrepancy too large")
    if abs(ent_b.birkhoff - ent_a.birkhoff) > 1e-2:
        failures.append("item (5i): center-unstable entropy not conserved")
    if params.omega > 0 and not central_b > central_a:
        failures.append("item (6i): central sum did not increase")
    if params.omega > 0 and central_b < 0.5 * drop - 1e-9:
        failures.append("item (6i): central gain below half the unstable drop")

    return PerturbationReport(
        equal_outside_ball=eq, stable_action_preserved=stable,
        rotation_form_verified=rot, norm_distance=norm_dist,
        norm_budget=budget,
        entropy_before=ent_a.birkhoff, entropy_after=ent_b.birkhoff,
        entropy_gap=abs(ent_b.birkhoff - ent_a.birkhoff),
        central_sum_before=central_a, central_sum_after=central_b,
        unstable_before=unstable_a, unstable_after=unstable_b,
        observed_drop=drop, predicted_drop_full=pred_full,
        predicted_drop_kac=pred_kac, visit_fraction=stats.visit_fraction,
        mean_return=stats.mean_return, horizon=n,
        verdict="PASS" if not failures else "FAIL", failures=failures)


# --------------------------------------------------------------------------
# corollary constants and central balancing


def rho_after(alpha: float) -> float:
    """Domination constant surviving the perturbation: (1 + alpha) / 2."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 0.5 * (1.0 + alpha)


def k_ell_estimate(norm_a: float, eps: float, ell: int) -> float:
    """Telescoping constant: ||A^l - B^l|| <= K_l ||A - B||."""
    return sum(norm_a ** i * (norm_a + eps) ** (ell - 1 - i) for i in range(ell))


def eps_thresholds(theta: float, ell: int, alpha: float, k_ell: float) -> float:
    """Largest admissible perturbation size keeping the dominated sum."""
    if not (0.0 < alpha < 1.0 and theta > 0.0 and ell >= 1):
        raise ValueError("need alpha in (0,1), theta > 0, ell >= 1")
    return min(theta / 2.0,
               (1.0 / (2.0 * k_ell)) * ((1.0 - alpha) / (1.0 + alpha))
               * (theta / 2.0) ** ell)


def lambda_p(spectrum: specmod.LyapunovSpectrum, p: int) -> float:
    """Sum of the p largest exponents counted with multiplicity."""
    flat = spectrum.flat()
    if p > len(flat):
        raise InsufficientHorizonError(
            f"p={p} exceeds the {len(flat)} resolved head exponents")
    return float(sum(flat[:p]))


@dataclass
class BalanceResult:
    cocycle: opmod.Cocycle
    factors: np.ndarray
    target: float
    clamped: bool            # needs-iteration diagnostic when True
    shifts: np.ndarray


def balance_central(B: opmod.Cocycle, split: opmod.SplittingSpec, eps: float,
                    spectrum: specmod.LyapunovSpectrum,
                    zero_floor: Optional[float] = None) -> BalanceResult:
    """Scale each central direction toward the central mean, keeping C
    within eps of B in sup norm.

    When the central mean itself sits inside the zero gap, the common
    target is lifted to +-zero_floor (default eps / 2) on the side of the
    central sum, so the balanced exponents end up bounded away from zero.
    Clamped shifts set the needs-iteration flag: re-measure and re-apply.
    """
    flat = spectrum.flat()
    if len(flat) < split.D:
        raise InsufficientHorizonError("spectrum does not resolve the cu block")
    central = np.array(flat[split.d:split.D])
    central_sum = float(np.sum(central))
    if central_sum == 0.0:
        raise ParameterError(
            "sum of central exponents is zero; apply the center-unstable "
            "rotation first")
    if split.c == 0:
        return BalanceResult(B, np.array([]), 0.0, False, np.array([]))
    target = float(np.mean(central))
    floor = eps / 2.0 if zero_floor is None else zero_floor
    if abs(target) < floor:
        target = math.copysign(floor, central_sum)
    # per-direction norm of B on the central frame bounds the C0 distance
    uc = split.c_at(np.zeros(2))
    b0 = B.at(np.zeros(2)).block
    col_norms = np.linalg.norm(b0 @ uc, axis=0)
    bound = np.log1p(eps / np.maximum(col_norms, 1e-300))
    lo = np.log(np.maximum(1.0 - eps / np.maximum(col_norms, 1e-300), 1e-12))
    shifts = np.clip(target - central, lo, bound)
    clamped = bool(np.any(np.abs(shifts - (target - central)) > 1e-12))
    factors = np.exp(shifts)
    return BalanceResult(opmod.CentralScalingCocycle(B, factors, split),
                         factors=factors, target=target, clamped=clamped,
                         shifts=shifts)
