"""Forcing families ``g_eps`` and their budget tallies.

Scalar data (``theta``, ``f``) may be given as a number, a precomputed array
on the grid, or a callable ``fn(t, x)`` with ``x`` the cell-centre array of
shape ``(dim, *shape)``.  Drift vectors ``b`` accept a sequence of numbers, an
array of shape ``(dim, *shape)`` or a callable returning one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .grid import Grid, gradient, integrate
from .potential import sqrt_2w

ScalarData = Union[float, np.ndarray, Callable[[float, np.ndarray], Any]]
VectorData = Union[Sequence[float], np.ndarray, Callable[[float, np.ndarray], Any]]


class ForcingConfigError(ValueError):
    """A forcing variant was evaluated without the field it depends on."""


@dataclass(frozen=True)
class Zero:
    kind = "zero"


@dataclass(frozen=True)
class ScaledScalar:
    """``g = theta sqrt(2 W(u))``; positive ``theta`` grows ``{u = +1}``."""

    theta: ScalarData
    kind = "scaled-scalar"


@dataclass(frozen=True)
class DriftPotential:
    """``g = eps b . grad u + f sqrt(2 W(u))``."""

    b: VectorData
    f: ScalarData = 0.0
    kind = "drift-potential"


@dataclass(frozen=True)
class GradientMagnitude:
    """``g = eps f |grad u|``."""

    f: ScalarData
    kind = "gradient-magnitude"


@dataclass(frozen=True)
class CoupledField:
    """``g = theta sqrt(2 W(u))`` with ``theta`` the evolving bulk field (``aux['theta']``)."""

    kind = "coupled-field"


@dataclass(frozen=True)
class Concentration:
    """``g = coupling * f(c)`` with ``f(r) = r`` and ``c = aux['c']``.

    The default ``coupling = -1`` is the sign for which the grain-boundary free
    energy decreases along the flow.
    """

    coupling: float = -1.0
    kind = "concentration"


ForcingSpec = Union[Zero, ScaledScalar, DriftPotential, GradientMagnitude, CoupledField, Concentration]


def scalar_data(value: ScalarData, t: float, grid: Grid) -> np.ndarray:
    if callable(value):
        out = np.asarray(value(t, grid.coords()), dtype=float)
        return np.broadcast_to(out, grid.shape)
    return np.broadcast_to(np.asarray(value, dtype=float), grid.shape)


def vector_data(value: VectorData, t: float, grid: Grid) -> np.ndarray:
    if callable(value):
        out = np.asarray(value(t, grid.coords()), dtype=float)
    else:
        out = np.asarray(value, dtype=float)
    if out.ndim == 1:
        out = out.reshape((grid.dim,) + (1,) * grid.dim)
    return np.broadcast_to(out, (grid.dim, *grid.shape))


def vanishes_at_wells(spec: ForcingSpec) -> bool:
    """True when ``g = 0`` wherever ``u = +-1`` (so ``|u| <= 1`` is preserved)."""
    return isinstance(spec, (Zero, ScaledScalar, CoupledField))


def evaluate_forcing(
    spec: ForcingSpec,
    t: float,
    u: np.ndarray,
    grid: Grid,
    eps: float,
    aux: Optional[Mapping[str, np.ndarray]] = None,
) -> np.ndarray:
    aux = aux or {}
    if isinstance(spec, Zero):
        return np.zeros(grid.shape)
    if isinstance(spec, ScaledScalar):
        return scalar_data(spec.theta, t, grid) * sqrt_2w(u)
    if isinstance(spec, DriftPotential):
        b = vector_data(spec.b, t, grid)
        drift = eps * np.sum(b * gradient(u, grid), axis=0)
        return drift + scalar_data(spec.f, t, grid) * sqrt_2w(u)
    if isinstance(spec, GradientMagnitude):
        grad = gradient(u, grid)
        return eps * scalar_data(spec.f, t, grid) * np.sqrt(np.sum(grad * grad, axis=0))
    if isinstance(spec, CoupledField):
        if "theta" not in aux:
            raise ForcingConfigError("coupled-field forcing needs aux['theta']")
        return aux["theta"] * sqrt_2w(u)
    if isinstance(spec, Concentration):
        if "c" not in aux:
            raise ForcingConfigError("concentration forcing needs aux['c']")
        return spec.coupling * aux["c"]
    raise TypeError(f"unknown forcing spec {spec!r}")


def drift_sup(spec: ForcingSpec, t: float, grid: Grid) -> float:
    """``max_x (|f|^2 + |b|^2)`` over the grid samples; zero for other variants."""
    if not isinstance(spec, DriftPotential):
        return 0.0
    b = vector_data(spec.b, t, grid)
    f = scalar_data(spec.f, t, grid)
    return float(np.max(f * f + np.sum(b * b, axis=0)))


@dataclass(frozen=True)
class ForcingBudget:
    """Running ``int int g^2/eps`` (``lam``) and ``int sup(|f|^2+|b|^2) dt`` (``lam1``)."""

    lam: float = 0.0
    lam1: float = 0.0


def budget_step(
    budget: ForcingBudget,
    g: np.ndarray,
    eps: float,
    dt: float,
    grid: Grid,
    spec: Optional[ForcingSpec] = None,
    t: float = 0.0,
) -> ForcingBudget:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lam = budget.lam + dt * integrate(g * g, grid) / eps
    lam1 = budget.lam1
    if spec is not None and isinstance(spec, DriftPotential):
        lam1 += dt * drift_sup(spec, t, grid)
    return replace(budget, lam=lam, lam1=lam1)


def drift_budget_bound(lam0: float, lam1: float) -> float:
    """Gronwall-type ceiling ``4 lam0 e^{lam1} lam1`` on the drift forcing tally."""
    return 4.0 * lam0 * np.exp(lam1) * lam1
