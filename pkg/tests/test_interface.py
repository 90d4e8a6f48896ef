import math

import numpy as np
import pytest

from acflow.forcing import ScaledScalar, Zero
from acflow.grid import Grid
from acflow.interface import (
    EXTINCT,
    FitQualityError,
    RadialOracle,
    extract_interface,
    fit_sphere,
    front_speed,
    interface_metrics,
    radial_solution,
)
from acflow.potential import ProfileSpec, plane, sphere, well_prepared_initial
from acflow.solver import SolverState, StepperConfig, step


def test_circle_extinction_time():
    oracle = RadialOracle(2, 0.3)
    assert oracle.extinction_time == pytest.approx(0.045)
    assert radial_solution(oracle, 0.045) is EXTINCT
    assert radial_solution(oracle, 0.05) is EXTINCT
    assert radial_solution(oracle, 0.0) == pytest.approx(0.3)


def test_sphere_closed_form():
    assert radial_solution(RadialOracle(3, 0.3), 0.01) == pytest.approx(math.sqrt(0.05), rel=1e-12)
    assert math.sqrt(0.05) == pytest.approx(0.2236, abs=1e-4)


def test_forced_circle_stationary_radius_repels():
    # the root of -1/r + 2 exists but is unstable: perturbations grow in both directions
    assert RadialOracle(2, 0.5, f=2.0).stationary_radius == pytest.approx(0.5)
    assert RadialOracle(2, 0.5, f=0.0).stationary_radius is None
    inner = RadialOracle(2, 0.49, f=2.0, horizon=5.0)
    outer = RadialOracle(2, 0.51, f=2.0, horizon=5.0)
    assert inner.extinction_time is not None
    assert radial_solution(inner, 0.5 * inner.extinction_time) < 0.49
    assert radial_solution(outer, 1.0) > 0.6
    at_root = RadialOracle(2, 0.5, f=2.0, horizon=1.0)
    assert radial_solution(at_root, 1.0) == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3])
def test_ode_matches_closed_form(n):
    # a vanishing forcing through the ODE path vs the closed form
    r0 = 0.3
    ode = RadialOracle(n, r0, f=1e-300)
    t_ext = r0**2 / (2 * (n - 1))
    assert ode.extinction_time == pytest.approx(t_ext, rel=1e-9)
    for t in np.linspace(0.0, 0.99 * t_ext, 25):
        exact = math.sqrt(r0**2 - 2 * (n - 1) * t)
        assert radial_solution(ode, t) == pytest.approx(exact, rel=1e-9)


def test_oracle_errors():
    with pytest.raises(ValueError):
        RadialOracle(1, 0.3)
    with pytest.raises(ValueError):
        RadialOracle(2, 0.0)
    with pytest.raises(ValueError):
        radial_solution(RadialOracle(2, 0.3), -1.0)
    with pytest.raises(ValueError):
        radial_solution(RadialOracle(2, 0.3, f=5.0, horizon=0.1), 0.2)


def test_1d_crossing_position():
    eps, x0 = 0.05, 0.1234
    g = Grid.box([-1.0], [1.0], [400])
    u = well_prepared_initial(ProfileSpec(eps, plane([x0], [1.0])), g)
    curve = extract_interface(u, g)
    assert curve.points.shape == (1, 1)
    assert abs(curve.points[0, 0] - x0) <= g.h ** 2 / eps


def test_circle_polyline_radius_and_length():
    eps = 0.02
    g = Grid.box([-0.5, -0.5], [0.5, 0.5], [256, 256])
    u = well_prepared_initial(ProfileSpec(eps, sphere([0.0, 0.0], 0.3)), g)
    curve = extract_interface(u, g)
    assert len(curve.polylines) == 1 and curve.closed == [True]
    m = interface_metrics(curve)
    assert abs(m.radius - 0.3) <= g.h
    assert np.allclose(m.centroid, 0.0, atol=g.h)
    assert m.measure == pytest.approx(2 * math.pi * 0.3, rel=5e-3)
    assert m.components == 1


def test_plane_recovered_within_h():
    eps = 0.05
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], [80, 80])
    normal = np.array([1.0, 2.0]) / math.sqrt(5.0)
    u = well_prepared_initial(ProfileSpec(eps, plane([0.1, -0.05], normal)), g)
    pts = extract_interface(u, g).points
    assert np.max(np.abs((pts - [0.1, -0.05]) @ normal)) <= g.h


def test_sphere_crossings_recover_radius():
    eps = 0.05
    g = Grid.box([-0.6] * 3, [0.6] * 3, [56] * 3)
    u = well_prepared_initial(ProfileSpec(eps, sphere([0.02, 0.0, -0.01], 0.25)), g)
    centre, radius = fit_sphere(extract_interface(u, g).points)
    assert abs(radius - 0.25) <= g.h
    assert np.allclose(centre, [0.02, 0.0, -0.01], atol=g.h)


def test_no_sign_change_is_empty():
    g = Grid.box([0.0, 0.0], [1.0, 1.0], [16, 16])
    curve = extract_interface(g.full(0.5), g)
    assert curve.empty
    with pytest.raises(ValueError):
        interface_metrics(curve)


def test_straight_segment_length():
    g = Grid.box([0.0, 0.0], [1.0, 1.0], [50, 50])
    x, _ = g.coords()
    m = interface_metrics(extract_interface(x - 0.503, g))
    assert m.components == 1
    # the polyline spans the outermost cell centres, one h short of the box
    assert abs(m.measure - 1.0) <= g.h + 1e-12


def test_two_concentric_circles():
    g = Grid.box([-0.5, -0.5], [0.5, 0.5], [256, 256])
    x, y = g.coords()
    r = np.hypot(x, y)
    u = np.where(r < 0.15, 1.0, np.where(r < 0.35, -1.0, 1.0)) * np.minimum(np.abs(r - 0.15), np.abs(r - 0.35))
    curve = extract_interface(u, g)
    assert len(curve.polylines) == 2 and all(curve.closed)
    m = interface_metrics(curve)
    assert m.components == 2
    assert m.measure == pytest.approx(2 * math.pi * 0.5, rel=5e-3)


def test_saddle_uses_cell_average():
    # a hyperbolic saddle centred in the middle square; its corners carry -+h^2/4 + c
    g = Grid.box([0.0, 0.0], [4.0, 4.0], [4, 4])
    x, y = g.coords()
    for c, side in ((0.1, 1.0), (-0.1, -1.0)):
        curve = extract_interface(-(x - 2.0) * (y - 2.0) + c, g)
        assert len(curve.polylines) == 2
        # positive average joins the positive corners, so both branches bend around the negative ones
        for poly in curve.polylines:
            mid = poly.mean(axis=0) - 2.0
            assert side * mid[0] * mid[1] > 0


def test_front_speed_fit():
    t = np.linspace(0.0, 1.0, 20)
    assert front_speed(t, 0.3 * t + 0.1) == pytest.approx(0.3)
    assert front_speed(t, np.zeros_like(t)) == 0.0
    with pytest.raises(ValueError):
        front_speed(t[:5], t[:5])
    garbage = np.where(np.arange(20) % 2, 1.0, -1.0)
    with pytest.raises(FitQualityError):
        front_speed(t, garbage, h=0.01)


def _crossings(f, eps=0.04, cells=200, horizon=0.3, samples=30):
    g = Grid.box([-1.0], [1.0], [cells])
    u = well_prepared_initial(ProfileSpec(eps, plane([0.0], [1.0])), g)
    cfg = StepperConfig()
    state = SolverState(0.0, u, eps, cfg.time_step(g, eps))
    spec = ScaledScalar(f) if f else Zero()
    every = int(round(horizon / samples / state.dt))
    times, pos = [], []
    for k in range(samples * every + 1):
        if k % every == 0:
            times.append(state.t)
            pos.append(extract_interface(state.u, g).points[0, 0])
        state = step(state, spec, cfg, g)
    return g, times, pos


def test_stationary_front_speed():
    g, t, p = _crossings(0.0)
    assert abs(front_speed(t, p, g.h)) <= g.h / t[-1]


@pytest.mark.parametrize("f", [0.2, -0.2])
def test_forced_front_speed_sign(f):
    # {u=+1} lies at x > 0, so growth moves the crossing towards -x
    g, t, p = _crossings(f)
    speed = -front_speed(t, p, g.h)
    assert speed == pytest.approx(f, rel=0.03)
