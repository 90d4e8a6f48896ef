"""Sharp-interface oracles and zero-level-set extraction.

Sign conventions used throughout the package:

* the normal ``grad u / |grad u|`` points into ``{u = +1}``;
* a positive scalar forcing grows ``{u = +1}``;
* a ball of radius ``r`` holding ``{u = +1}`` obeys ``dr/dt = -(n-1)/r + f``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .grid import Grid


class Extinct(enum.Enum):
    """Returned by :func:`radial_solution` once the ball has vanished."""

    EXTINCT = "extinct"


EXTINCT = Extinct.EXTINCT


class FitQualityError(ValueError):
    """Front positions are too noisy for a meaningful speed fit."""


@dataclass(frozen=True)
class RadialOracle:
    n: int
    r0: float
    f: float = 0.0
    horizon: float = 10.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"radial oracle needs n in (2, 3), got {self.n}")
        if self.r0 <= 0:
            raise ValueError(f"initial radius must be positive, got {self.r0}")

    @property
    def stationary_radius(self) -> float | None:
        """Root of ``-(n-1)/r + f``.  It exists only for ``f > 0`` and repels."""
        return (self.n - 1) / self.f if self.f > 0 else None

    @cached_property
    def _solution(self):
        # integrate s = r^2, for which ds/dt = -2(n-1) + 2 f sqrt(s) is regular at extinction
        def rhs(t, s):
            return [-2.0 * (self.n - 1) + 2.0 * self.f * math.sqrt(max(s[0], 0.0))]

        def vanished(t, s):
            return s[0]

        vanished.terminal = True
        vanished.direction = -1
        return solve_ivp(
            rhs,
            (0.0, self.horizon),
            [self.r0**2],
            method="DOP853",
            rtol=1e-10,
            atol=1e-14,
            dense_output=True,
            events=vanished,
        )

    @property
    def extinction_time(self) -> float | None:
        if self.f == 0.0:
            return self.r0**2 / (2.0 * (self.n - 1))
        events = self._solution.t_events[0]
        return float(events[0]) if len(events) else None


def radial_solution(oracle: RadialOracle, t: float) -> Union[float, Extinct]:
    """Radius at time ``t``; ``EXTINCT`` once the ball has vanished."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    t_ext = oracle.extinction_time
    if t_ext is not None and t >= t_ext:
        return EXTINCT
    if oracle.f == 0.0:
        return math.sqrt(oracle.r0**2 - 2.0 * (oracle.n - 1) * t)
    sol = oracle._solution
    if t > sol.t[-1]:
        raise ValueError(f"time {t} is beyond the integrated horizon {sol.t[-1]}")
    return math.sqrt(max(float(sol.sol(t)[0]), 0.0))


@dataclass
class InterfaceCurve:
    """Zero level set of a phase field.

    ``polylines`` holds ordered vertex arrays (2D only); ``points`` holds every
    crossing point in any dimension.
    """

    dim: int
    points: np.ndarray
    polylines: list[np.ndarray] = field(default_factory=list)
    closed: list[bool] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0


def _edge_crossings(u: np.ndarray, x: list[np.ndarray], axis: int) -> np.ndarray:
    a = np.take(u, np.arange(u.shape[axis] - 1), axis=axis)
    b = np.take(u, np.arange(1, u.shape[axis]), axis=axis)
    hit = (a > 0) != (b > 0)
    idx = np.nonzero(hit)
    if not idx[0].size:
        return np.zeros((0, u.ndim))
    ua, ub = a[idx], b[idx]
    frac = ua / (ua - ub)
    pts = np.empty((idx[0].size, u.ndim))
    for k in range(u.ndim):
        base = x[k][idx[k]]
        if k == axis:
            h = x[k][1] - x[k][0]
            base = base + frac * h
        pts[:, k] = base
    return pts


def _marching_squares(u: np.ndarray, x: list[np.ndarray]) -> tuple[list[np.ndarray], list[bool]]:
    pos = u > 0
    nx, ny = u.shape
    # candidate squares: corners do not all share one sign
    s = pos[:-1, :-1].astype(int) + pos[1:, :-1] + pos[1:, 1:] + pos[:-1, 1:]
    squares = np.argwhere((s > 0) & (s < 4))

    def point(key):
        kind, i, j = key
        if kind == 0:  # edge (i, j) -> (i + 1, j)
            a, b = u[i, j], u[i + 1, j]
            fr = a / (a - b)
            return (x[0][i] + fr * (x[0][i + 1] - x[0][i]), x[1][j])
        a, b = u[i, j], u[i, j + 1]
        fr = a / (a - b)
        return (x[0][i], x[1][j] + fr * (x[1][j + 1] - x[1][j]))

    segments = []
    for i, j in squares:
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
        edges = [(0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j)]
        sign = [pos[c] for c in corners]
        cut = [k for k in range(4) if sign[k] != sign[(k + 1) % 4]]
        if len(cut) == 2:
            segments.append((edges[cut[0]], edges[cut[1]]))
            continue
        # saddle: decide by the sign of the square average
        centre_pos = sum(u[c] for c in corners) > 0
        if centre_pos == sign[0]:
            # corners 0 and 2 are joined through the centre, so cut off 1 and 3
            segments.append((edges[0], edges[1]))
            segments.append((edges[2], edges[3]))
        else:
            segments.append((edges[3], edges[0]))
            segments.append((edges[1], edges[2]))

    incident: dict[tuple, list[int]] = {}
    for n, (ea, eb) in enumerate(segments):
        incident.setdefault(ea, []).append(n)
        incident.setdefault(eb, []).append(n)

    used = [False] * len(segments)
    polylines, closed = [], []

    def walk(start_seg, start_edge):
        chain = [start_edge]
        seg, edge = start_seg, start_edge
        while True:
            used[seg] = True
            ea, eb = segments[seg]
            edge = eb if edge == ea else ea
            chain.append(edge)
            nxt = [k for k in incident[edge] if not used[k]]
            if not nxt:
                return chain
            seg = nxt[0]

    # open curves start at edges touched by a single segment
    for edge, segs in sorted(incident.items()):
        if len(segs) == 1 and not used[segs[0]]:
            chain = walk(segs[0], edge)
            polylines.append(np.array([point(e) for e in chain]))
            closed.append(False)
    for n in range(len(segments)):
        if not used[n]:
            chain = walk(n, segments[n][0])
            is_closed = chain[-1] == chain[0]
            polylines.append(np.array([point(e) for e in chain]))
            closed.append(is_closed)
    return polylines, closed


def extract_interface(u: np.ndarray, grid: Grid) -> InterfaceCurve:
    """Linear-interpolated zero crossings; 2D crossings are joined into polylines."""
    x = grid.axes()
    points = np.concatenate([_edge_crossings(u, x, axis) for axis in range(grid.dim)])
    curve = InterfaceCurve(grid.dim, points)
    if grid.dim == 2 and len(points):
        curve.polylines, curve.closed = _marching_squares(u, x)
    return curve


def fit_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares circle/sphere: algebraic fit refined geometrically."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < pts.shape[1] + 1:
        raise ValueError("not enough points for a sphere fit")
    A = np.column_stack([2 * pts, np.ones(len(pts))])
    rhs = np.sum(pts * pts, axis=1)
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    centre = sol[:-1]
    radius = math.sqrt(max(sol[-1] + centre @ centre, 0.0))

    def resid(p):
        return np.linalg.norm(pts - p[:-1], axis=1) - p[-1]

    refined = least_squares(resid, np.append(centre, radius), xtol=1e-14, ftol=1e-14)
    return refined.x[:-1], float(abs(refined.x[-1]))


@dataclass(frozen=True)
class InterfaceMetrics:
    measure: float
    radius: float
    centroid: np.ndarray
    components: int


def interface_metrics(curve: InterfaceCurve) -> InterfaceMetrics:
    """Total polyline length (2D; crossing count otherwise), fitted radius, centroid."""
    if curve.empty:
        raise ValueError("interface is empty")
    if curve.dim == 2:
        measure = sum(float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1))) for p in curve.polylines)
        components = len(curve.polylines)
    else:
        measure = float(len(curve.points))
        components = 1
    if curve.dim >= 2 and len(curve.points) > curve.dim + 1:
        centroid, radius = fit_sphere(curve.points)
    else:
        centroid, radius = np.mean(curve.points, axis=0), float("nan")
    return InterfaceMetrics(measure, radius, np.asarray(centroid), components)


def front_speed(times: Sequence[float], positions: Sequence[float], h: float = 0.0) -> float:
    """Least-squares slope of crossing position against time.

    Raises ``FitQualityError`` when the rms deviation from the line exceeds
    ``max(h, 0.1 * range)``.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(positions, dtype=float)
    if len(t) < 10 or len(t) != len(p):
        raise ValueError("need at least 10 matching (time, position) samples")
    slope, icpt = np.polyfit(t, p, 1)
    rms = float(np.sqrt(np.mean((p - (slope * t + icpt)) ** 2)))
    if rms > max(h, 0.1 * float(np.ptp(p))) + 1e-15:
        raise FitQualityError(f"rms deviation {rms:.3g} from a linear front is too large")
    return float(slope)
