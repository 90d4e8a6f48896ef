"""Coupled systems driven through the Allen-Cahn stepper.

Mullins-Sekerka with kinetic undercooling::

    eps u_t = eps Lap u - W'(u)/eps + sqrt(2W(u)) theta
    theta_t = Lap theta - sqrt(2W(u)) u_t

Grain-boundary motion with ``f(r) = r`` and mobility ``D(u) = max((1-u^2)^2, delta)``::

    eps u_t = eps Lap u - W'(u)/eps - c
    eps c_t = div(D(u) grad(c + eps (u + 1)))

Both are advanced by first-order splitting: ``u`` first, then the second field
with the fresh ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .diagnostics import energy
from .forcing import Concentration, CoupledField
from .grid import Grid, face_gradient_sq, integrate
from .potential import g_antiderivative, w_value
from .solver import SimulationError, SolverState, StepData, StepperConfig, advance, solve_helmholtz

MOBILITY_FLOOR = 1e-6


class LinearSolveError(SimulationError):
    """The iterative linear solver did not converge."""


@dataclass(frozen=True)
class MsState:
    ac: SolverState
    theta: np.ndarray
    kinetic: float = 0.0  # int int eps u_t^2
    theta_dissipation: float = 0.0  # int int |grad theta|^2

    @property
    def t(self) -> float:
        return self.ac.t

    @property
    def u(self) -> np.ndarray:
        return self.ac.u

    @property
    def eps(self) -> float:
        return self.ac.eps


def ms_conserved(state: MsState, grid: Grid) -> float:
    """``int (theta + G(u))``, invariant under the no-flux dynamics."""
    return integrate(state.theta + g_antiderivative(state.u), grid)


def ms_energy(state: MsState, grid: Grid) -> float:
    """``E(u) + 1/2 ||theta||^2``."""
    return energy(state.u, state.eps, grid) + 0.5 * integrate(state.theta**2, grid)


def ms_step(state: MsState, grid: Grid, cfg: StepperConfig = StepperConfig()) -> tuple[MsState, StepData, np.ndarray]:
    """Advance ``(u, theta)`` by ``state.ac.dt``; returns the new state, the
    Allen-Cahn step data and ``theta_mid``.

    The sink uses ``G(u1) - G(u0)`` for ``sqrt(2W(u)) u_t dt``, which keeps
    ``int (theta + G(u))`` constant to round-off.
    """
    if cfg.scheme != "semi-implicit":
        raise ValueError("the coupled solvers only support the semi-implicit scheme")
    ac1, data = advance(state.ac, CoupledField(), cfg, grid, aux={"theta": state.theta})
    dt = data.dt
    sink = g_antiderivative(data.u1) - g_antiderivative(data.u0)
    theta1 = solve_helmholtz(state.theta - sink, grid, dt)
    if not np.all(np.isfinite(theta1)):
        raise SimulationError(f"non-finite temperature field at t={ac1.t:.6g}")
    theta_mid = 0.5 * (state.theta + theta1)
    ut = data.du_dt
    new = MsState(
        ac1,
        theta1,
        kinetic=state.kinetic + dt * integrate(state.eps * ut * ut, grid),
        theta_dissipation=state.theta_dissipation + dt * integrate(face_gradient_sq(theta_mid, grid), grid),
    )
    return new, data, theta_mid


def ms_energy_identity(initial: MsState, current: MsState, grid: Grid) -> float:
    """Relative misclosure of
    ``E(t) + 1/2||theta||^2 + int int (eps u_t^2 + |grad theta|^2) = E(0) + 1/2||theta0||^2``.
    """
    rhs = ms_energy(initial, grid)
    lhs = ms_energy(current, grid) + current.kinetic + current.theta_dissipation
    if rhs == 0:
        return abs(lhs)
    return abs(lhs - rhs) / rhs


@dataclass(frozen=True)
class GrainState:
    ac: SolverState
    c: np.ndarray
    delta_d: float = MOBILITY_FLOOR

    @property
    def t(self) -> float:
        return self.ac.t

    @property
    def u(self) -> np.ndarray:
        return self.ac.u

    @property
    def eps(self) -> float:
        return self.ac.eps


def mobility(u: np.ndarray, delta_d: float = MOBILITY_FLOOR) -> np.ndarray:
    return np.maximum((1.0 - u * u) ** 2, delta_d)


def free_energy(u: np.ndarray, c: np.ndarray, eps: float, grid: Grid) -> float:
    """``int eps/2 |grad u|^2 + W(u)/eps + c^2/(2 eps) + (u + 1) c``."""
    density = 0.5 * eps * face_gradient_sq(u, grid) + w_value(u) / eps + c * c / (2.0 * eps) + (u + 1.0) * c
    return integrate(density, grid)


@lru_cache(maxsize=4)
def _face_index(grid: Grid):
    # (left, right) flat indices of the interior faces along each axis
    idx = np.arange(np.prod(grid.shape)).reshape(grid.shape)
    out = []
    for axis in range(grid.dim):
        left = np.take(idx, np.arange(grid.shape[axis] - 1), axis=axis).ravel()
        right = np.take(idx, np.arange(1, grid.shape[axis]), axis=axis).ravel()
        out.append((left, right))
    return out


def weighted_laplacian(d: np.ndarray, grid: Grid) -> sp.csr_matrix:
    """Matrix of ``v -> div(d grad v)`` in flux form with no-flux boundaries.

    Face coefficients are arithmetic means of the adjacent cell values; every
    column sums to zero, so the operator conserves the integral exactly.
    """
    n = d.size
    flat = d.ravel()
    rows, cols, vals = [], [], []
    for left, right in _face_index(grid):
        k = 0.5 * (flat[left] + flat[right]) / grid.h**2
        rows += [left, left, right, right]
        cols += [left, right, right, left]
        vals += [-k, k, -k, k]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def grain_step(state: GrainState, grid: Grid, cfg: StepperConfig = StepperConfig(), tol: float = 1e-12) -> tuple[GrainState, StepData]:
    """Advance ``(u, c)``; the concentration solve is implicit in ``c`` with
    the mobility frozen at the pre-step ``u``."""
    if cfg.scheme != "semi-implicit":
        raise ValueError("the coupled solvers only support the semi-implicit scheme")
    eps = state.eps
    ac1, data = advance(state.ac, Concentration(), cfg, grid, aux={"c": state.c})
    dt = data.dt
    A = weighted_laplacian(mobility(data.u0, state.delta_d), grid)
    lhs = eps * sp.identity(A.shape[0], format="csr") - dt * A
    rhs = eps * state.c.ravel() + dt * (A @ (eps * (data.u1.ravel() + 1.0)))
    precond = sp.diags(1.0 / lhs.diagonal())
    c1, info = cg(lhs, rhs, x0=state.c.ravel(), rtol=tol, atol=0.0, M=precond, maxiter=10_000)
    if info != 0:
        raise LinearSolveError(f"concentration solve did not converge (info={info}) at t={ac1.t:.6g}")
    c1 = c1.reshape(grid.shape)
    if not np.all(np.isfinite(c1)):
        raise SimulationError(f"non-finite concentration at t={ac1.t:.6g}")
    return replace(state, ac=ac1, c=c1), data


def well_exceedance_bound(forcing_sup: float, eps: float) -> float:
    """Largest ``|u|`` compatible with a comparison argument when ``|g| <= forcing_sup``.

    Solves ``r^3 - r = eps * forcing_sup`` for ``r >= 1``.
    """
    s = eps * forcing_sup
    if s <= 0:
        return 1.0
    roots = np.roots([1.0, 0.0, -1.0, -s])
    return float(max(r.real for r in roots if abs(r.imag) < 1e-12))
