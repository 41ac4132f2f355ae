"""Base dynamical systems: torus homeomorphisms with Lebesgue/Haar measure.

Three systems are provided: an irrational circle rotation, a translation of
the 2-torus, and the cat map. The first two are uniquely ergodic; the cat
map is mixing. All preserve Lebesgue measure, which is positive on open
sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySampleError

# Golden-mean rotation number (continued fraction [0;1,1,1,...]): the
# "most irrational" angle, so orbits equidistribute as fast as possible.
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

CAT_MATRIX = np.array([[2, 1], [1, 1]], dtype=np.int64)
CAT_INVERSE = np.array([[1, -1], [-1, 2]], dtype=np.int64)


@dataclass(frozen=True)
class BaseSystem:
    """A measure-preserving homeomorphism of the d-torus (d = 1 or 2)."""

    kind: str
    angles: tuple = ()
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("circle_rotation", "torus_translation", "cat_map"):
            raise ValueError(f"unknown base system kind: {self.kind!r}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "circle_rotation" else 2

    @property
    def diameter(self) -> float:
        return 0.5 * math.sqrt(self.dim)


def circle_rotation(angle: float = GOLDEN) -> BaseSystem:
    return BaseSystem("circle_rotation", (float(angle),),
                      f"circle rotation by {angle!r}")


def torus_translation(a1: float = GOLDEN, a2: float = math.sqrt(2.0) - 1.0) -> BaseSystem:
    return BaseSystem("torus_translation", (float(a1), float(a2)),
                      f"torus translation by ({a1!r}, {a2!r})")


def cat_map() -> BaseSystem:
    return BaseSystem("cat_map", (), "cat map [[2,1],[1,1]] on the 2-torus")


def as_point(coords) -> np.ndarray:
    x = np.atleast_1d(np.asarray(coords, dtype=float)) % 1.0
    return x


def step(sys: BaseSystem, x, k: int = 1) -> np.ndarray:
    """Iterate the base map: returns f^k(x), k may be negative."""
    x = as_point(x)
    if k == 0:
        return x.copy()
    if sys.kind == "circle_rotation":
        return (x + k * sys.angles[0]) % 1.0
    if sys.kind == "torus_translation":
        return (x + k * np.asarray(sys.angles)) % 1.0
    # cat map: iterate the integer matrix; exact in exact arithmetic,
    # float round-off grows with |k| so large |k| loses accuracy.
    m = CAT_MATRIX if k > 0 else CAT_INVERSE
    y = x.copy()
    for _ in range(abs(k)):
        y = (m @ y) % 1.0
    return y


def orbit(sys: BaseSystem, x0, n: int):
    """Yield x0, f(x0), ..., f^(n-1)(x0)."""
    x = as_point(x0)
    for _ in range(n):
        yield x
        x = step(sys, x, 1)


def distance(sys: BaseSystem, x, y) -> float:
    """Flat torus metric (minimum over lifts)."""
    dx = np.abs(as_point(x) - as_point(y))
    dx = np.minimum(dx, 1.0 - dx)
    return float(np.sqrt(np.sum(dx * dx)))


def sample_measure(sys: BaseSystem, seed: int, count: int) -> np.ndarray:
    """Draw `count` i.i.d. Lebesgue points, reproducibly. Shape (count, d)."""
    if count < 1:
        raise EmptySampleError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(count, sys.dim))


@dataclass
class ReturnStats:
    mean_return: float
    visit_count: int
    visit_fraction: float
    no_return: bool = False


def return_time_stats(sys: BaseSystem, p, r: float, x0, horizon: int) -> ReturnStats:
    """Visit statistics of the orbit of x0 in the ball B(p, r).

    mean_return is the average gap between successive visits; Kac's theorem
    predicts 1/mu(B(p,r)) for a typical orbit.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = as_point(p)
    visits = [j for j, x in enumerate(orbit(sys, x0, horizon))
              if distance(sys, x, p) < r]
    if not visits:
        return ReturnStats(math.inf, 0, 0.0, no_return=True)
    if len(visits) == 1:
        return ReturnStats(math.inf, 1, 1.0 / horizon, no_return=True)
    gaps = np.diff(visits)
    return ReturnStats(float(np.mean(gaps)), len(visits), len(visits) / horizon)
