"""Scenario configuration files.

A config is one YAML mapping::

    scenario: circle-mcf          # see SCENARIOS
    dim: 2
    lower: [-0.5, -0.5]
    upper: [0.5, 0.5]
    cells: 256                    # int or per-axis list
    epsilons: [0.02]
    horizon: 0.03
    output_interval: 0.005        # time between diagnostics rows
    scheme: semi-implicit         # or explicit
    dt_rule: cfl                  # or fixed (then dt is required)
    dt: null
    seed: 0                       # battery construction
    extinction: false             # allow a horizon past the oracle extinction
    snapshots: ends               # ends | all | none
    geometry: {kind: sphere, center: [0, 0], radius: 0.3}
    forcing: {theta: 2.0, f: 0.0, b: [0.0, 0.0]}
    ms: {theta0: 0.5, theta0_width: 0.3}
    grain: {amplitude: 0.5, center: [0.0, 0.2], width: 0.2, delta_d: 1.0e-6}

Validation reports every problem at once.
"""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..grid import Grid
from ..potential import MarginError, ProfileSpec, plane, sphere, well_prepared_initial
from ..solver import ResolutionWarning

SCENARIOS = (
    "standing-profile",
    "traveling-front",
    "circle-mcf",
    "circle-forced",
    "drift-circle",
    "ms-undercooling",
    "grain-boundary",
)
RADIAL = ("circle-mcf", "circle-forced", "drift-circle", "ms-undercooling")
PLANAR = ("standing-profile", "traveling-front", "grain-boundary")

# h/eps thresholds
RESOLUTION_TARGET = 0.25
RESOLUTION_ERROR = 0.5

_KNOWN_KEYS = {
    "scenario", "dim", "lower", "upper", "cells", "epsilons", "horizon", "output_interval", "scheme",
    "dt_rule", "dt", "seed", "extinction", "snapshots", "geometry", "forcing", "ms", "grain", "battery_size",
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells: tuple[int, ...]
    epsilons: tuple[float, ...]
    horizon: float
    output_interval: float
    scheme: str = "semi-implicit"
    dt_rule: str = "cfl"
    dt: Optional[float] = None
    seed: int = 0
    extinction: bool = False
    snapshots: str = "ends"
    battery_size: int = 12
    geometry: dict = field(default_factory=dict)
    forcing: dict = field(default_factory=dict)
    ms: dict = field(default_factory=dict)
    grain: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return Grid.box(self.lower, self.upper, self.cells)

    def with_epsilons(self, epsilons) -> "ScenarioConfig":
        raw = self.as_dict()
        raw["epsilons"] = list(epsilons)
        return parse_config(raw)

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "dim": self.dim,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "cells": list(self.cells),
            "epsilons": list(self.epsilons),
            "horizon": self.horizon,
            "output_interval": self.output_interval,
            "scheme": self.scheme,
            "dt_rule": self.dt_rule,
            "dt": self.dt,
            "seed": self.seed,
            "extinction": self.extinction,
            "snapshots": self.snapshots,
            "battery_size": self.battery_size,
            "geometry": copy.deepcopy(self.geometry),
            "forcing": copy.deepcopy(self.forcing),
            "ms": copy.deepcopy(self.ms),
            "grain": copy.deepcopy(self.grain),
        }


def _number_list(raw, key, n, errors, positive=False):
    val = raw.get(key)
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val] * n
    if not isinstance(val, (list, tuple)) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
        errors.append(f"{key}: expected a number or a list of numbers, got {val!r}")
        return None
    if len(val) != n:
        errors.append(f"{key}: expected {n} entries, got {len(val)}")
        return None
    if positive and any(v <= 0 for v in val):
        errors.append(f"{key}: entries must be positive, got {list(val)}")
        return None
    return tuple(float(v) for v in val)


def _default_geometry(scenario: str, dim: int) -> dict:
    if scenario in PLANAR:
        return {"kind": "plane", "point": [0.0] * dim, "normal": [1.0] + [0.0] * (dim - 1)}
    return {"kind": "sphere", "center": [0.0] * dim, "radius": 0.3}


def parse_config(raw: Any) -> ScenarioConfig:
    """Validate a raw mapping; raises :class:`ConfigError` listing all problems."""
    if not isinstance(raw, dict):
        raise ConfigError([f"config must be a mapping, got {type(raw).__name__}"])
    errors: list[str] = []
    for key in sorted(set(raw) - _KNOWN_KEYS):
        errors.append(f"{key}: unknown key")

    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        errors.append(f"scenario: must be one of {', '.join(SCENARIOS)}, got {scenario!r}")
    dim = raw.get("dim")
    if dim not in (1, 2, 3):
        errors.append(f"dim: must be 1, 2 or 3, got {dim!r}")
        raise ConfigError(errors)
    if scenario in RADIAL and dim == 1:
        errors.append(f"dim: scenario {scenario} needs dim 2 or 3")

    lower = _number_list(raw, "lower", dim, errors)
    upper = _number_list(raw, "upper", dim, errors)
    cells_raw = raw.get("cells")
    cells = None
    if isinstance(cells_raw, int) and not isinstance(cells_raw, bool):
        cells_raw = [cells_raw] * dim
    if isinstance(cells_raw, (list, tuple)) and len(cells_raw) == dim and all(isinstance(c, int) and c >= 4 for c in cells_raw):
        cells = tuple(cells_raw)
    else:
        errors.append(f"cells: expected an integer >= 4 or {dim} of them, got {raw.get('cells')!r}")

    eps_raw = raw.get("epsilons")
    epsilons = None
    if isinstance(eps_raw, (int, float)) and not isinstance(eps_raw, bool):
        eps_raw = [eps_raw]
    if isinstance(eps_raw, (list, tuple)) and eps_raw and all(isinstance(e, (int, float)) and e > 0 for e in eps_raw):
        epsilons = tuple(float(e) for e in eps_raw)
    else:
        errors.append(f"epsilons: expected a nonempty list of positive numbers, got {raw.get('epsilons')!r}")

    horizon = raw.get("horizon")
    if not isinstance(horizon, (int, float)) or horizon <= 0:
        errors.append(f"horizon: must be a positive number, got {horizon!r}")
    interval = raw.get("output_interval", horizon)
    if not isinstance(interval, (int, float)) or interval <= 0:
        errors.append(f"output_interval: must be a positive number, got {interval!r}")

    scheme = raw.get("scheme", "semi-implicit")
    if scheme not in ("semi-implicit", "explicit"):
        errors.append(f"scheme: must be semi-implicit or explicit, got {scheme!r}")
    if scheme == "explicit" and scenario in ("ms-undercooling", "grain-boundary"):
        errors.append("scheme: coupled scenarios only support semi-implicit")
    dt_rule = raw.get("dt_rule", "cfl")
    dt = raw.get("dt")
    if dt_rule not in ("cfl", "fixed"):
        errors.append(f"dt_rule: must be cfl or fixed, got {dt_rule!r}")
    if dt_rule == "fixed" and (not isinstance(dt, (int, float)) or dt <= 0):
        errors.append(f"dt: a fixed dt rule needs a positive dt, got {dt!r}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append(f"seed: must be an integer, got {seed!r}")
    snapshots = raw.get("snapshots", "ends")
    if snapshots not in ("ends", "all", "none"):
        errors.append(f"snapshots: must be ends, all or none, got {snapshots!r}")
    battery_size = raw.get("battery_size", 12)
    if not isinstance(battery_size, int) or battery_size < 1:
        errors.append(f"battery_size: must be a positive integer, got {battery_size!r}")

    geometry = raw.get("geometry") or _default_geometry(scenario, dim)
    for key in ("forcing", "ms", "grain"):
        if raw.get(key) is not None and not isinstance(raw.get(key), dict):
            errors.append(f"{key}: must be a mapping")
    forcing = dict(raw.get("forcing") or {})
    if "b" in forcing and (not isinstance(forcing["b"], (list, tuple)) or len(forcing["b"]) != dim):
        errors.append(f"forcing.b: expected {dim} numbers, got {forcing['b']!r}")

    if errors:
        raise ConfigError(errors)

    cfg = ScenarioConfig(
        scenario=scenario,
        dim=dim,
        lower=lower,
        upper=upper,
        cells=cells,
        epsilons=epsilons,
        horizon=float(horizon),
        output_interval=float(interval),
        scheme=scheme,
        dt_rule=dt_rule,
        dt=float(dt) if dt is not None else None,
        seed=seed,
        extinction=bool(raw.get("extinction", False)),
        snapshots=snapshots,
        battery_size=battery_size,
        geometry=dict(geometry),
        forcing=forcing,
        ms=dict(raw.get("ms") or {}),
        grain=dict(raw.get("grain") or {}),
    )
    _check_physics(cfg)
    return cfg


def _geometry_errors(cfg: ScenarioConfig) -> tuple[list[str], Any]:
    geo = cfg.geometry
    kind = geo.get("kind")
    try:
        if kind == "sphere":
            if cfg.scenario in PLANAR:
                return [f"geometry: scenario {cfg.scenario} needs a plane"], None
            return [], sphere(geo["center"], float(geo["radius"]))
        if kind == "plane":
            if cfg.scenario in RADIAL:
                return [f"geometry: scenario {cfg.scenario} needs a sphere"], None
            return [], plane(geo["point"], geo["normal"])
    except (KeyError, TypeError, ValueError) as exc:
        return [f"geometry: {exc}"], None
    return [f"geometry.kind: must be sphere or plane, got {kind!r}"], None


def _check_physics(cfg: ScenarioConfig) -> None:
    errors: list[str] = []
    try:
        grid = cfg.grid
    except ValueError as exc:
        raise ConfigError([f"domain: {exc}"]) from None
    for eps in cfg.epsilons:
        ratio = grid.h / eps
        if ratio > RESOLUTION_ERROR:
            errors.append(f"epsilons: h = {grid.h:.4g} exceeds eps/2 for eps = {eps:g}")
        elif ratio > RESOLUTION_TARGET:
            warnings.warn(f"h = {grid.h:.4g} is coarser than eps/4 for eps = {eps:g}", ResolutionWarning, stacklevel=3)
        if cfg.scheme == "explicit":
            dt = cfg.dt if cfg.dt_rule == "fixed" else min(0.2 * grid.h**2, 0.2 * eps**2)
            if not dt < grid.h**2 / (2 * grid.dim):
                errors.append(f"dt: explicit scheme needs dt < h^2/(2n) = {grid.h**2 / (2 * grid.dim):.3g}")
    geo_errors, geometry = _geometry_errors(cfg)
    errors += geo_errors
    if geometry is not None:
        for eps in cfg.epsilons:
            try:
                well_prepared_initial(ProfileSpec(eps, geometry), grid)
            except MarginError as exc:
                errors.append(f"geometry: {exc}")
    if cfg.scenario == "circle-mcf" and geometry is not None and not cfg.extinction:
        t_ext = geometry.radius**2 / (2 * (cfg.dim - 1))
        if cfg.horizon >= t_ext:
            errors.append(
                f"horizon: {cfg.horizon:g} is past the oracle extinction time {t_ext:g}; set extinction: true for an extinction study"
            )
    if cfg.output_interval > cfg.horizon:
        errors.append("output_interval: must not exceed the horizon")
    if errors:
        raise ConfigError(errors)


def check_sweep(cfg: ScenarioConfig) -> None:
    """A sweep needs at least three geometrically spaced epsilons."""
    eps = sorted(cfg.epsilons, reverse=True)
    if len(eps) < 3:
        raise ConfigError([f"epsilons: a sweep needs at least 3 values, got {len(eps)}"])
    ratios = [eps[i] / eps[i + 1] for i in range(len(eps) - 1)]
    if max(ratios) / min(ratios) > 1.05 or min(ratios) <= 1.0:
        raise ConfigError([f"epsilons: a sweep needs distinct geometrically spaced values, got {list(cfg.epsilons)}"])


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML: {exc}"]) from None
    return parse_config(raw)


def parse_epsilons(text: str) -> list[float]:
    """``"0.08,0.04,0.02"`` to a list of floats."""
    try:
        values = [float(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise ConfigError([f"--epsilon: cannot parse {text!r}"]) from None
    if not values or any(not math.isfinite(v) or v <= 0 for v in values):
        raise ConfigError([f"--epsilon: expected positive numbers, got {text!r}"])
    return values
