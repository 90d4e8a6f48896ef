"""Diffuse geometric quantities measured along a phase-field run.

Energy-type integrands use the face-based ``|grad u|^2`` (so the discrete
energy is exactly the one whose gradient is the chemical potential).  Normals,
velocities and the kinetic measure ``eps |grad u|^2`` use centred gradients.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import Grid, ball_mass, face_gradient_sq, gradient, integrate, laplacian
from .potential import c0, w_value
from .solver import StepData, chemical_potential

# |grad u| at or below this counts as degenerate for normals and velocities
DEGENERACY_THRESHOLD = 1e-12
BATTERY_SIZE = 12


def measure_density(u: np.ndarray, eps: float, grid: Grid) -> np.ndarray:
    """Density of the diffuse surface measure, ``eps/2 |grad u|^2 + W(u)/eps``."""
    return 0.5 * eps * face_gradient_sq(u, grid) + w_value(u) / eps


def energy(u: np.ndarray, eps: float, grid: Grid) -> float:
    return integrate(measure_density(u, eps, grid), grid)


def discrepancy(u: np.ndarray, eps: float, grid: Grid) -> tuple[np.ndarray, float]:
    """Signed field ``eps/2 |grad u|^2 - W(u)/eps`` and its L1 norm."""
    xi = 0.5 * eps * face_gradient_sq(u, grid) - w_value(u) / eps
    return xi, integrate(np.abs(xi), grid)


def willmore_tally(u: np.ndarray, eps: float, grid: Grid) -> float:
    w = chemical_potential(u, eps, grid)
    return integrate(w * w, grid) / eps


def _grad_and_norm(u: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    grad = gradient(u, grid)
    return grad, np.sqrt(np.sum(grad * grad, axis=0))


def diffuse_normal(u: np.ndarray, grid: Grid) -> np.ndarray:
    """``grad u / |grad u|``, falling back to ``e_1`` where the gradient vanishes."""
    grad, norm = _grad_and_norm(u, grid)
    ok = norm > DEGENERACY_THRESHOLD
    nu = np.where(ok, grad / np.where(ok, norm, 1.0), 0.0)
    nu[0] = np.where(ok, nu[0], 1.0)
    return nu


def diffuse_velocity(u_before: np.ndarray, u_after: np.ndarray, dt: float, grid: Grid) -> np.ndarray:
    """``-(u_t / |grad u|) nu`` at the time midpoint; zero where ``grad u`` vanishes."""
    grad, norm = _grad_and_norm(0.5 * (u_before + u_after), grid)
    ok = norm > DEGENERACY_THRESHOLD
    ut = (u_after - u_before) / dt
    return np.where(ok, -ut * grad / np.where(ok, norm * norm, 1.0), 0.0)


def tilde_density(u: np.ndarray, eps: float, grid: Grid) -> np.ndarray:
    """Density of the kinetic measure ``eps |grad u|^2``."""
    grad = gradient(u, grid)
    return eps * np.sum(grad * grad, axis=0)


def projection_residual(
    u_before: np.ndarray,
    u_after: np.ndarray,
    dt: float,
    eps: float,
    grid: Grid,
    velocity: Optional[np.ndarray] = None,
) -> tuple[float, float]:
    """Tangential and total kinetic energy of the diffuse velocity.

    Returns ``(int |P v|^2 d mu~, int |v|^2 d mu~)`` with ``P = Id - nu (x) nu``.
    The first entry is zero up to rounding for the built-in velocity; the
    ``velocity`` argument lets a caller inject an arbitrary field instead.
    """
    u_mid = 0.5 * (u_before + u_after)
    v = diffuse_velocity(u_before, u_after, dt, grid) if velocity is None else velocity
    nu = diffuse_normal(u_mid, grid)
    tangential = v - np.sum(nu * v, axis=0) * nu
    weight = tilde_density(u_mid, eps, grid)
    return (
        integrate(np.sum(tangential**2, axis=0) * weight, grid),
        integrate(np.sum(v * v, axis=0) * weight, grid),
    )


def _jacobian(eta: np.ndarray, grid: Grid) -> np.ndarray:
    # jac[i, j] = d eta_i / d x_j
    return np.stack([gradient(eta[i], grid) for i in range(grid.dim)])


def first_variation(u: np.ndarray, eps: float, grid: Grid, eta: np.ndarray) -> float:
    """Diffuse first variation ``int (div eta - nu . D eta nu) d mu_eps``."""
    jac = _jacobian(eta, grid)
    div = np.trace(jac)
    nu = diffuse_normal(u, grid)
    normal_part = np.einsum("i...,ij...,j...->...", nu, jac, nu)
    return integrate((div - normal_part) * measure_density(u, eps, grid), grid)


def curvature_pairing(u: np.ndarray, eps: float, grid: Grid, eta: np.ndarray) -> float:
    """``int eta . w grad u``, the diffuse ``int eta . H d mu``."""
    w = chemical_potential(u, eps, grid)
    return integrate(w * np.sum(eta * gradient(u, grid), axis=0), grid)


def curvature_pairing_residual(u: np.ndarray, eps: float, grid: Grid, eta: np.ndarray) -> float:
    """``|delta V(eta) + int eta . w grad u|``; the continuum gap is a discrepancy integral."""
    return abs(first_variation(u, eps, grid, eta) + curvature_pairing(u, eps, grid, eta))


def dissipation_residual(data: StepData, eps: float, grid: Grid, e0: float, e1: float) -> float:
    """Per-unit-time mismatch of ``2 dE/dt = int g^2/eps - int (eps u_t^2 + w^2/eps)``,
    divided by the energy at the start of the step."""
    lhs = 2.0 * (e1 - e0) / data.dt
    ut = data.du_dt
    rhs = integrate(data.g_mid**2, grid) / eps - integrate(eps * ut * ut + data.w_mid**2 / eps, grid)
    return abs(lhs - rhs) / e0 if e0 > 0 else abs(lhs - rhs)


def energy_balance_residual(e0: float, e1: float, lam: float, dissipation: float) -> float:
    """Relative misclosure of ``2 (E(T) - E(0)) = lam - dissipation``.

    The scale is ``2 E(0) + lam + dissipation``; exact equilibria give zero.
    """
    scale = 2.0 * e0 + lam + dissipation
    gap = abs(2.0 * (e1 - e0) - (lam - dissipation))
    return gap / scale if scale > 0 else gap


def density_ratio_sup(
    u: np.ndarray,
    eps: float,
    grid: Grid,
    centers: Iterable[Sequence[float]],
    radii: Sequence[float],
) -> float:
    """``max mu(B_R(x)) / R^(n-1)`` over sampled centres and radii."""
    density = measure_density(u, eps, grid)
    best = 0.0
    for c in centers:
        for r in radii:
            best = max(best, ball_mass(density, grid, c, r) / r ** (grid.dim - 1))
    return best


def density_ratio_radii(eps: float, grid: Grid) -> list[float]:
    """``2 eps, 4 eps, ...`` up to a quarter of the shortest box side."""
    out, r = [], 2.0 * eps
    while r <= min(grid.extent) / 4 + 1e-12:
        out.append(r)
        r *= 2.0
    return out or [2.0 * eps]


def density_ratio_centers(u: np.ndarray, grid: Grid, per_axis: int = 7, on_interface: int = 16) -> np.ndarray:
    """A uniform lattice of centres plus a few cells from the transition layer."""
    lattice = np.stack(
        np.meshgrid(*[np.linspace(lo, hi, per_axis + 2)[1:-1] for lo, hi in zip(grid.lower, grid.upper)], indexing="ij")
    ).reshape(grid.dim, -1).T
    layer = np.argwhere(np.abs(u) < 0.5)
    if len(layer):
        pick = layer[np.linspace(0, len(layer) - 1, min(on_interface, len(layer))).astype(int)]
        layer_pts = grid.lower + (pick + 0.5) * grid.h
        lattice = np.concatenate([lattice, layer_pts])
    return lattice


def _bump(s: np.ndarray) -> np.ndarray:
    return np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 4, 0.0)


def _bump_prime(s: np.ndarray) -> np.ndarray:
    return np.where(np.abs(s) < 1.0, -8.0 * s * (1.0 - s * s) ** 3, 0.0)


@dataclass
class TestFunctionBattery:
    """Nonnegative space-time functions ``zeta_j(t, x) = a_j(t) phi_j(x)``.

    ``phi_j`` is a tensor product of ``(1 - s^2)^4`` bumps times a positive
    linear polynomial, supported away from the boundary; ``a_j`` is a bump in
    time supported inside ``(0, T)``.
    """

    __test__ = False  # not a pytest class

    grid: Grid
    horizon: float
    centers: np.ndarray
    half_widths: np.ndarray
    tilts: np.ndarray
    t_centers: np.ndarray
    t_half_widths: np.ndarray
    phi: np.ndarray = field(init=False, repr=False)
    grad_phi: np.ndarray = field(init=False, repr=False)
    lap_phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = self.grid.coords()
        phis = []
        for c, r, tilt in zip(self.centers, self.half_widths, self.tilts):
            s = (x - c.reshape((-1,) + (1,) * self.grid.dim)) / r.reshape((-1,) + (1,) * self.grid.dim)
            p = np.prod(_bump(s), axis=0) * (1.0 + np.tensordot(tilt, s, axes=1))
            phis.append(p)
        self.phi = np.stack(phis)
        self.grad_phi = np.stack([gradient(p, self.grid) for p in self.phi])
        self.lap_phi = np.stack([laplacian(p, self.grid) for p in self.phi])

    @classmethod
    def build(cls, grid: Grid, horizon: float, seed: int = 0, size: int = BATTERY_SIZE) -> "TestFunctionBattery":
        rng = np.random.default_rng(seed)
        lo, hi = grid.lower, grid.upper
        ext = hi - lo
        centers = lo + ext * rng.uniform(0.3, 0.7, size=(size, grid.dim))
        # half widths stay inside the box with a two-cell gap
        room = np.minimum(centers - lo, hi - centers) - 2 * grid.h
        half = np.minimum(ext * rng.uniform(0.2, 0.45, size=(size, grid.dim)), room)
        half = np.maximum(half, 4 * grid.h)
        tilts = rng.uniform(-0.3, 0.3, size=(size, grid.dim))
        t_half = horizon * rng.uniform(0.2, 0.3, size=size)
        t_centers = horizon * rng.uniform(0.35, 0.65, size=size)
        t_half = np.minimum(t_half, np.minimum(t_centers, horizon - t_centers) * 0.98)
        return cls(grid, horizon, centers, half, tilts, t_centers, t_half)

    def __len__(self) -> int:
        return len(self.centers)

    def time_factor(self, t: float) -> np.ndarray:
        return _bump((t - self.t_centers) / self.t_half_widths)

    def time_factor_rate(self, t: float) -> np.ndarray:
        return _bump_prime((t - self.t_centers) / self.t_half_widths) / self.t_half_widths

    @property
    def sup_norms(self) -> np.ndarray:
        return self.phi.reshape(len(self), -1).max(axis=1)

    def vector_fields(self) -> list[np.ndarray]:
        """Vector test fields ``phi_j e_{j mod n}`` for first-variation checks."""
        out = []
        for j, p in enumerate(self.phi):
            eta = np.zeros((self.grid.dim, *self.grid.shape))
            eta[j % self.grid.dim] = p
            out.append(eta)
        return out


class TrajectoryAccumulator:
    """Time integrals over a run needed by the Brakke and L2-flow checks.

    Per step (time midpoint quadrature, telescoping in ``zeta mu``):

    * ``a``: ``int int d_t zeta d mu``
    * ``b``: ``int int grad zeta . v d mu~``
    * ``c``: ``int int zeta |v|^2 d mu~``
    * ``d``: ``int int zeta w^2/eps``
    """

    def __init__(self, battery: TestFunctionBattery, eps: float):
        self.battery = battery
        self.eps = eps
        m = len(battery)
        self.a = np.zeros(m)
        self.b = np.zeros(m)
        self.c = np.zeros(m)
        self.d = np.zeros(m)
        self.lam = 0.0
        self._flat_phi = battery.phi.reshape(m, -1)
        self._flat_grad = battery.grad_phi.reshape(m, -1)

    def update(self, data: StepData, mu0: np.ndarray, mu1: np.ndarray) -> None:
        grid, eps, dt = self.battery.grid, self.eps, data.dt
        t0, t1 = data.t0, data.t0 + dt
        a0, a1 = self.battery.time_factor(t0), self.battery.time_factor(t1)
        a_mid, a_rate = 0.5 * (a0 + a1), (a1 - a0) / dt
        if not np.any(a0) and not np.any(a1):
            self.lam += dt * integrate(data.g_mid**2, grid) / eps
            return
        vol = grid.cell_volume
        ut = data.du_dt
        grad = gradient(data.u_mid, grid)
        gn2 = np.sum(grad * grad, axis=0)
        flux = (-eps * ut * grad).reshape(grid.dim, -1)
        kinetic = np.where(gn2 > DEGENERACY_THRESHOLD**2, eps * ut * ut, 0.0).ravel()
        curv = (data.w_mid**2 / eps).ravel()
        mu_mid = (0.5 * (mu0 + mu1)).ravel()
        self.a += dt * a_rate * (self._flat_phi @ mu_mid) * vol
        self.b += dt * a_mid * (self._flat_grad @ flux.ravel()) * vol
        self.c += dt * a_mid * (self._flat_phi @ kinetic) * vol
        self.d += dt * a_mid * (self._flat_phi @ curv) * vol
        self.lam += dt * integrate(data.g_mid**2, grid) / eps

    def brakke_slack(self) -> np.ndarray:
        """RHS minus LHS of the diffuse Brakke-type inequality, per battery member."""
        return self.a + self.b - 0.5 * (self.c + self.d) + 0.5 * self.battery.sup_norms * self.lam

    def l2flow_constant(self) -> float:
        """``max_j |int int (d_t zeta + grad zeta . v) d mu| / sup zeta``."""
        return float(np.max(np.abs(self.a + self.b) / self.battery.sup_norms))


class WeakBulkAccumulator:
    """``int int (d_t eta + Lap eta) theta + (c0/2) u d_t eta`` per battery member."""

    def __init__(self, battery: TestFunctionBattery):
        self.battery = battery
        m = len(battery)
        self.total = np.zeros(m)
        self._flat_phi = battery.phi.reshape(m, -1)
        self._flat_lap = battery.lap_phi.reshape(m, -1)

    def update(self, t0: float, dt: float, u_mid: np.ndarray, theta_mid: np.ndarray) -> None:
        a0, a1 = self.battery.time_factor(t0), self.battery.time_factor(t0 + dt)
        if not np.any(a0) and not np.any(a1):
            return
        a_mid, a_rate = 0.5 * (a0 + a1), (a1 - a0) / dt
        th, uu = theta_mid.ravel(), u_mid.ravel()
        vol = self.battery.grid.cell_volume
        self.total += dt * vol * (
            a_rate * (self._flat_phi @ th) + a_mid * (self._flat_lap @ th) + 0.5 * c0() * a_rate * (self._flat_phi @ uu)
        )

    def residual(self) -> float:
        return float(np.max(np.abs(self.total)))


SCHEMA_VERSION = 1


@dataclass
class DiagnosticsRecord:
    """One output time.  Field order is the CSV column order."""

    t: float
    energy: float
    tilde_mu_total: float
    action: float
    lam: float
    lam1: float
    dissipation: float
    willmore: float
    discrepancy_l1: float
    dissipation_residual: float
    energy_balance_residual: float
    projection_residual: float
    kinetic_energy: float
    curvature_pairing_residual: float
    interface_position: float
    interface_measure: float
    density_ratio_sup: float
    max_abs_u: float
    conserved: float
    aux_energy: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[float]:
        return [getattr(self, name) for name in self.columns()]

    def as_dict(self) -> dict:
        return asdict(self)
