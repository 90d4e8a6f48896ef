"""Quartic double well ``W(r) = (1 - r^2)^2 / 4`` and the optimal profile."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .grid import Grid

SQRT2 = math.sqrt(2.0)
# margin (in units of epsilon) between an initial interface and the box
PROFILE_MARGIN = 5.0


def w_value(r):
    return 0.25 * (1.0 - r * r) ** 2


def w_prime(r):
    return r * r * r - r


def sqrt_2w(r):
    """``sqrt(2 W(r)) = |1 - r^2| / sqrt(2)``."""
    return np.abs(1.0 - r * r) / SQRT2


def g_antiderivative(r):
    """``G(r) = int_0^r sqrt(2W)``; constant outside ``[-1, 1]``."""
    r = np.clip(r, -1.0, 1.0)
    return (r - r**3 / 3.0) / SQRT2


def c0() -> float:
    """Surface tension ``int_{-1}^{1} sqrt(2W) = 2 sqrt(2) / 3``."""
    return 2.0 * SQRT2 / 3.0


def optimal_profile(z):
    return np.tanh(z / SQRT2)


def optimal_profile_derivative(z):
    return (1.0 - np.tanh(z / SQRT2) ** 2) / SQRT2


@dataclass(frozen=True)
class Plane:
    """Half space ``{(x - point) . normal > 0}``."""

    point: tuple[float, ...]
    normal: tuple[float, ...]

    def __post_init__(self):
        if len(self.point) != len(self.normal) or not np.any(np.asarray(self.normal, dtype=float)):
            raise ValueError(f"plane needs a nonzero normal matching the point dimension, got {self.normal}")

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        return sum(n[k] * (x[k] - self.point[k]) for k in range(len(n)))

    def margin(self, grid: Grid) -> float:
        corners = np.array(np.meshgrid(*[(lo, hi) for lo, hi in zip(grid.lower, grid.upper)], indexing="ij"))
        d = self.signed_distance(corners.reshape(grid.dim, -1))
        return float(min(d.max(), -d.min()))


@dataclass(frozen=True)
class Sphere:
    """Open ball (a disc in 2D); ``{u ~ +1}`` is the inside."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        r = np.sqrt(sum((x[k] - self.center[k]) ** 2 for k in range(len(self.center))))
        return self.radius - r

    def margin(self, grid: Grid) -> float:
        c = np.asarray(self.center)
        return float(min((c - self.radius - grid.lower).min(), (grid.upper - c - self.radius).min()))


Geometry = Union[Plane, Sphere]


@dataclass(frozen=True)
class ProfileSpec:
    eps: float
    geometry: Geometry

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"epsilon must be positive, got {self.eps}")


class MarginError(ValueError):
    """The initial interface sits too close to the domain boundary."""


def well_prepared_initial(spec: ProfileSpec, grid: Grid, check_margin: bool = True) -> np.ndarray:
    """``q(d(x) / eps)`` with ``d`` the signed distance to the geometry."""
    geom = spec.geometry
    if len(getattr(geom, "center", getattr(geom, "point", ()))) != grid.dim:
        raise ValueError("geometry dimension does not match the grid")
    if check_margin:
        margin = geom.margin(grid)
        if margin < PROFILE_MARGIN * spec.eps:
            raise MarginError(
                f"interface is {margin:.4g} from the boundary; need at least "
                f"{PROFILE_MARGIN:g} * eps = {PROFILE_MARGIN * spec.eps:.4g}"
            )
    return optimal_profile(geom.signed_distance(grid.coords()) / spec.eps)


def sphere(center: Sequence[float], radius: float) -> Sphere:
    return Sphere(tuple(float(c) for c in center), float(radius))


def plane(point: Sequence[float], normal: Sequence[float]) -> Plane:
    return Plane(tuple(float(p) for p in point), tuple(float(n) for n in normal))
