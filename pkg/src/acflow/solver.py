"""Time stepping for ``eps u_t = eps Lap u - W'(u)/eps + g``.

The semi-implicit scheme solves ``(I - dt Lap) u1 = u0 + dt (-W'(u0)/eps^2 + g/eps)``
exactly in the cosine basis, which diagonalises the mirror-ghost Laplacian.
All per-step tallies are integrated with the time midpoint
``u_mid = (u0 + u1) / 2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping, Optional

import numpy as np
from scipy import fft

from .forcing import ForcingBudget, ForcingSpec, budget_step, evaluate_forcing
from .grid import Grid, integrate, laplacian
from .potential import w_prime


class ResolutionWarning(UserWarning):
    """The interface width is poorly resolved by the grid."""


class SimulationError(RuntimeError):
    """The time integration produced non-finite values or could not proceed."""


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "semi-implicit"
    dt_rule: str = "cfl"
    dt: Optional[float] = None
    gamma1: float = 0.2
    gamma2: float = 0.2

    def __post_init__(self):
        if self.scheme not in ("semi-implicit", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt_rule not in ("fixed", "cfl"):
            raise ValueError(f"unknown dt rule {self.dt_rule!r}")
        if self.dt_rule == "fixed" and (self.dt is None or self.dt <= 0):
            raise ValueError("a fixed dt rule needs a positive dt")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("dt scale factors must be positive")

    def time_step(self, grid: Grid, eps: float) -> float:
        if self.dt_rule == "fixed":
            dt = float(self.dt)
        else:
            dt = min(self.gamma1 * grid.h**2, self.gamma2 * eps**2)
        if self.scheme == "explicit" and not dt < grid.h**2 / (2 * grid.dim):
            raise ValueError(f"explicit scheme needs dt < h^2/(2n) = {grid.h**2 / (2 * grid.dim):.3g}, got {dt:.3g}")
        return dt


@dataclass(frozen=True)
class SolverState:
    t: float
    u: np.ndarray
    eps: float
    dt: float
    budget: ForcingBudget = field(default_factory=ForcingBudget)
    action: float = 0.0
    dissipation: float = 0.0
    steps: int = 0


@dataclass(frozen=True)
class StepData:
    """Intermediate quantities of one step, consumed by the diagnostics."""

    t0: float
    dt: float
    u0: np.ndarray
    u1: np.ndarray
    u_mid: np.ndarray
    g: np.ndarray
    g_mid: np.ndarray
    w_mid: np.ndarray
    residual: np.ndarray

    @property
    def du_dt(self) -> np.ndarray:
        return (self.u1 - self.u0) / self.dt


def check_resolution(grid: Grid, eps: float, limit: float = 0.5) -> None:
    if grid.h > limit * eps:
        warnings.warn(f"grid spacing {grid.h:.3g} exceeds {limit:g} * eps = {limit * eps:.3g}", ResolutionWarning, stacklevel=3)


def chemical_potential(u: np.ndarray, eps: float, grid: Grid) -> np.ndarray:
    """``w = -eps Lap u + W'(u)/eps``."""
    check_resolution(grid, eps)
    return -eps * laplacian(u, grid) + w_prime(u) / eps


@lru_cache(maxsize=16)
def _helmholtz_symbol(grid: Grid, dt: float) -> np.ndarray:
    # eigenvalues of the mirror-ghost Laplacian in the DCT-II basis
    sym = np.ones(grid.shape)
    lam = np.zeros(grid.shape)
    for axis, n in enumerate(grid.cells):
        k = np.arange(n)
        shape = [1] * grid.dim
        shape[axis] = n
        lam = lam + (-4.0 / grid.h**2 * np.sin(np.pi * k / (2 * n)) ** 2).reshape(shape)
    sym = sym - dt * lam
    sym.flags.writeable = False
    return sym


def solve_helmholtz(rhs: np.ndarray, grid: Grid, dt: float) -> np.ndarray:
    """Solve ``(I - dt Lap) x = rhs`` under homogeneous Neumann conditions."""
    coeff = fft.dctn(rhs, type=2, norm="ortho", workers=-1)
    return fft.idctn(coeff / _helmholtz_symbol(grid, float(dt)), type=2, norm="ortho", workers=-1)


def advance(
    state: SolverState,
    spec: ForcingSpec,
    cfg: StepperConfig,
    grid: Grid,
    aux: Optional[Mapping[str, np.ndarray]] = None,
) -> tuple[SolverState, StepData]:
    """One step plus the data the diagnostics need."""
    eps, dt, u0 = state.eps, state.dt, state.u
    g = evaluate_forcing(spec, state.t, u0, grid, eps, aux)
    explicit = -w_prime(u0) / eps**2 + g / eps
    if cfg.scheme == "semi-implicit":
        u1 = solve_helmholtz(u0 + dt * explicit, grid, dt)
    else:
        u1 = u0 + dt * (laplacian(u0, grid) + explicit)
    if not np.all(np.isfinite(u1)):
        raise SimulationError(f"non-finite phase field at t={state.t + dt:.6g} (step {state.steps + 1})")

    u_mid = 0.5 * (u0 + u1)
    t_mid = state.t + 0.5 * dt
    g_mid = evaluate_forcing(spec, t_mid, u_mid, grid, eps, aux)
    w_mid = -eps * laplacian(u_mid, grid) + w_prime(u_mid) / eps
    du_dt = (u1 - u0) / dt
    res = math.sqrt(eps) * du_dt + w_mid / math.sqrt(eps)

    new = replace(
        state,
        t=state.t + dt,
        u=u1,
        budget=budget_step(state.budget, g_mid, eps, dt, grid, spec, t_mid),
        action=state.action + dt * integrate(res * res, grid),
        dissipation=state.dissipation + dt * integrate(eps * du_dt**2 + w_mid**2 / eps, grid),
        steps=state.steps + 1,
    )
    return new, StepData(state.t, dt, u0, u1, u_mid, g, g_mid, w_mid, res)


def step(
    state: SolverState,
    spec: ForcingSpec,
    cfg: StepperConfig,
    grid: Grid,
    aux: Optional[Mapping[str, np.ndarray]] = None,
) -> SolverState:
    return advance(state, spec, cfg, grid, aux)[0]


def residual(before: SolverState, after: SolverState, grid: Grid) -> np.ndarray:
    """Root of the action integrand, ``sqrt(eps) u_t + w(u_mid)/sqrt(eps)``.

    Equals ``g / sqrt(eps)`` up to the time discretisation error.
    """
    eps = before.eps
    dt = after.t - before.t
    u_mid = 0.5 * (before.u + after.u)
    w_mid = -eps * laplacian(u_mid, grid) + w_prime(u_mid) / eps
    return math.sqrt(eps) * (after.u - before.u) / dt + w_mid / math.sqrt(eps)
