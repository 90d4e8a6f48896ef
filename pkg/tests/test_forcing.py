import math

import numpy as np
import pytest

from acflow.forcing import (
    Concentration,
    CoupledField,
    DriftPotential,
    ForcingBudget,
    ForcingConfigError,
    GradientMagnitude,
    ScaledScalar,
    Zero,
    budget_step,
    drift_budget_bound,
    drift_sup,
    evaluate_forcing,
    vanishes_at_wells,
)
from acflow.grid import Grid
from acflow.potential import ProfileSpec, plane, well_prepared_initial


def test_zero_forcing():
    g = Grid((1.0,), (8,))
    assert np.all(evaluate_forcing(Zero(), 0.0, np.linspace(-1, 1, 8), g, 0.1) == 0.0)


def test_scaled_scalar_at_zero_phase():
    g = Grid((1.0,), (8,))
    out = evaluate_forcing(ScaledScalar(2.0), 0.0, np.zeros(8), g, 0.1)
    assert np.allclose(out, math.sqrt(2))
    wells = evaluate_forcing(ScaledScalar(2.0), 0.0, np.array([1.0, -1.0] * 4), g, 0.1)
    assert np.all(wells == 0.0)


def test_drift_at_interface_matches_profile_slope():
    eps = 0.05
    g = Grid.box([-1], [1], [1001])  # a cell centre sits on the interface
    u = well_prepared_initial(ProfileSpec(eps, plane([0.0], [1.0])), g)
    out = evaluate_forcing(DriftPotential((1.0,), 0.0), 0.0, u, g, eps)
    assert out[500] == pytest.approx(1 / math.sqrt(2), rel=1e-3)


def test_gradient_magnitude_and_callables():
    g = Grid.box([0, 0], [1, 1], [16, 16])
    x = g.coords()
    u = x[0] - 0.5
    out = evaluate_forcing(GradientMagnitude(lambda t, x: 2.0 + 0 * x[0]), 0.0, u, g, 0.1)
    assert np.allclose(out[1:-1, :], 0.2)
    theta = lambda t, x: t * np.ones_like(x[0])  # noqa: E731
    assert np.allclose(evaluate_forcing(ScaledScalar(theta), 3.0, g.zeros(), g, 0.1), 3.0 * math.sqrt(0.5))


def test_aux_fields_required():
    g = Grid((1.0,), (8,))
    with pytest.raises(ForcingConfigError):
        evaluate_forcing(CoupledField(), 0.0, np.zeros(8), g, 0.1)
    with pytest.raises(ForcingConfigError):
        evaluate_forcing(Concentration(), 0.0, np.zeros(8), g, 0.1)
    c = np.arange(8.0)
    assert np.array_equal(evaluate_forcing(Concentration(), 0.0, np.zeros(8), g, 0.1, {"c": c}), -c)


def test_budget_examples():
    g = Grid.box([0, 0], [2, 1], [8, 4])
    b0 = ForcingBudget()
    assert budget_step(b0, g.zeros(), 0.1, 0.01, g) == b0
    b1 = budget_step(b0, g.full(1.0), 0.1, 0.01, g)
    assert b1.lam == pytest.approx(0.1 * g.volume)
    two = budget_step(budget_step(b0, g.full(0.7), 0.1, 0.01, g), g.full(0.7), 0.1, 0.01, g)
    one = budget_step(b0, g.full(0.7), 0.1, 0.02, g)
    assert two.lam == pytest.approx(one.lam)
    with pytest.raises(ValueError):
        budget_step(b0, g.zeros(), 0.1, 0.0, g)


def test_drift_sup_tally():
    g = Grid.box([0, 0], [1, 1], [8, 8])
    spec = DriftPotential((3.0, 4.0), 1.0)
    assert drift_sup(spec, 0.0, g) == pytest.approx(26.0)
    b = budget_step(ForcingBudget(), g.zeros(), 0.1, 0.5, g, spec)
    assert b.lam1 == pytest.approx(13.0)
    assert drift_sup(ScaledScalar(1.0), 0.0, g) == 0.0
    assert drift_budget_bound(2.0, 1.0) == pytest.approx(8.0 * math.e)


def test_vanishing_variants():
    assert vanishes_at_wells(ScaledScalar(1.0))
    assert vanishes_at_wells(CoupledField())
    assert not vanishes_at_wells(Concentration())
