"""Phase-field laboratory for perturbed Allen-Cahn flows and their sharp-interface limits."""

from .coupled import GrainState, MsState, free_energy, grain_step, ms_energy_identity, ms_step
from .diagnostics import (
    DiagnosticsRecord,
    TestFunctionBattery,
    curvature_pairing_residual,
    discrepancy,
    energy,
    first_variation,
    measure_density,
    willmore_tally,
)
from .forcing import (
    Concentration,
    CoupledField,
    DriftPotential,
    ForcingBudget,
    GradientMagnitude,
    ScaledScalar,
    Zero,
    evaluate_forcing,
)
from .grid import Grid, gradient, integrate, laplacian, load_snapshot, save_snapshot
from .interface import EXTINCT, RadialOracle, extract_interface, front_speed, interface_metrics, radial_solution
from .potential import ProfileSpec, c0, plane, sphere, well_prepared_initial
from .solver import SolverState, StepperConfig, advance, step

__all__ = [
    "Concentration",
    "CoupledField",
    "DiagnosticsRecord",
    "DriftPotential",
    "EXTINCT",
    "ForcingBudget",
    "GradientMagnitude",
    "GrainState",
    "Grid",
    "MsState",
    "ProfileSpec",
    "RadialOracle",
    "ScaledScalar",
    "SolverState",
    "StepperConfig",
    "TestFunctionBattery",
    "Zero",
    "advance",
    "c0",
    "curvature_pairing_residual",
    "discrepancy",
    "energy",
    "evaluate_forcing",
    "extract_interface",
    "first_variation",
    "free_energy",
    "front_speed",
    "gradient",
    "grain_step",
    "integrate",
    "interface_metrics",
    "laplacian",
    "load_snapshot",
    "measure_density",
    "ms_energy_identity",
    "ms_step",
    "plane",
    "radial_solution",
    "save_snapshot",
    "sphere",
    "step",
    "well_prepared_initial",
    "willmore_tally",
]

__version__ = "0.1.0"
