"""Canonical cocycles used across tests and scenarios."""

from __future__ import annotations

import math

import numpy as np

from . import operator as opmod

DEFAULT_M = 32


def example_block_diagonal(M: int = DEFAULT_M) -> opmod.ConstantCocycle:
    """The constant diagonal cocycle (2, 1, 1/3, 1/4, ...) with harmonic
    tail; exponents log 2, 0, -log 3, -log 4, ...

    Note on its domination constants: pairwise tightest ratios are 1/2 for
    (E^u, E^c), 1/3 for (E^c, E^s) and 1/6 for (E^u, E^s). The commonly
    quoted alpha = 1/6 for this fixture is the (E^u, E^s) value; all three
    are reported by the certification routines.
    """
    diag = [2.0, 1.0] + [1.0 / n for n in range(3, M + 1)]
    return opmod.ConstantCocycle(
        opmod.TruncatedOperator(np.diag(diag), opmod.harmonic_tail()))


def example_exponents(M: int = DEFAULT_M) -> np.ndarray:
    return np.array([math.log(2.0), 0.0] + [-math.log(n) for n in range(3, M + 1)])


def example_splitting(M: int = DEFAULT_M) -> opmod.SplittingSpec:
    """E^u = <e1>, E^c = <e2>, E^s the rest (block remainder plus tail)."""
    return opmod.coordinate_splitting(M, 1, 1)


def scaled_center_cocycle(eps: float, M: int = DEFAULT_M) -> opmod.ConstantCocycle:
    """diag(2 e^-eps, e^eps, 1/3, ...): same center-unstable entropy as the
    unscaled fixture, central exponent eps instead of zero."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    diag = [2.0 * math.exp(-eps), math.exp(eps)] + \
        [1.0 / n for n in range(3, M + 1)]
    return opmod.ConstantCocycle(
        opmod.TruncatedOperator(np.diag(diag), opmod.harmonic_tail()))


def scaled_center_distance(eps: float) -> float:
    """Exact C0 distance between the scaled and unscaled fixtures:
    max(2 (1 - e^-eps), e^eps - 1). Note this exceeds eps (it is ~2 eps for
    small eps), so the scaled fixture is 2 eps-close, not eps-close."""
    return max(2.0 * (1.0 - math.exp(-eps)), math.exp(eps) - 1.0)


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_block_cocycle(seed: int, M: int = 6, cells: int = 8,
                         spread: float = 0.2,
                         tail: opmod.Tail = None) -> opmod.TableCocycle:
    """A continuous table cocycle on the circle: per-cell blocks
    O1 diag(e^u) O2^T, linearly interpolated between cells.

    The log singular values u sit on an evenly spaced ladder covering
    [-spread, spread] with small per-cell jitter, and the frames are
    near-identity rotations, so the Lyapunov exponents stay simple with
    gaps of order 2*spread/(M-1); fully random frames scramble the ladder
    into clusters that no method can resolve at moderate horizons.
    """
    from scipy.linalg import expm

    rng = np.random.default_rng(seed)
    ladder = np.linspace(spread, -spread, M)
    gap = 2.0 * spread / max(M - 1, 1)

    def small_rotation():
        s = np.triu(rng.normal(scale=0.3 * gap, size=(M, M)), 1)
        return expm(s - s.T)

    grid = np.empty((cells, M, M))
    for i in range(cells):
        u = ladder + rng.uniform(-0.25 * gap, 0.25 * gap, size=M)
        grid[i] = small_rotation() @ np.diag(np.exp(u)) @ small_rotation().T
    return opmod.TableCocycle(grid, tail if tail is not None else opmod.zero_tail())
