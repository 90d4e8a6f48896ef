"""eps-sweeps: run every eps of a config and fit decay exponents."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..diagnostics import SCHEMA_VERSION
from .config import ScenarioConfig, check_sweep
from .runner import Assertion, RunResult, dumps_summary, run_single

# summary keys fitted against eps; a positive slope means decay as eps -> 0
TREND_METRICS = (
    "discrepancy_l1_final",
    "curvature_pairing_residual_final",
    "interface_error",
    "weak_bulk_residual",
)
# per-run oracle tolerances are stated for the finest eps; in a sweep the trend decides
ORACLE_ASSERTIONS = frozenset({"oracle_radius", "extinction_time", "stationary_radius", "front_speed", "standing_drift"})
ROW_KEYS = (
    "epsilon",
    "status",
    "energy_final",
    "discrepancy_l1_final",
    "curvature_pairing_residual_final",
    "interface_error",
    "weak_bulk_residual",
    "dissipation_residual_max",
    "energy_balance_residual",
    "brakke_slack_min",
    "l2flow_constant",
    "density_ratio_sup_max",
)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``log(metric) = slope * log(eps) + intercept``."""

    metric: str
    slope: float
    intercept: float
    ci95: tuple[float, float]
    n: int

    def as_dict(self) -> dict:
        return {"metric": self.metric, "slope": self.slope, "intercept": self.intercept, "ci95": list(self.ci95), "n": self.n}


def fit_decay(metric: str, eps: Sequence[float], values: Sequence[float]) -> Optional[DecayFit]:
    """Slope with a 95% t-interval; ``None`` when fewer than three usable points."""
    pts = [(e, v) for e, v in zip(eps, values) if v is not None and math.isfinite(v) and v > 0]
    if len(pts) < 3:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    fit = stats.linregress(x, y)
    half = stats.t.ppf(0.975, len(pts) - 2) * fit.stderr
    return DecayFit(metric, float(fit.slope), float(fit.intercept), (float(fit.slope - half), float(fit.slope + half)), len(pts))


def strictly_decreasing(eps: Sequence[float], values: Sequence[float]) -> bool:
    """True when the metric drops at every step towards smaller eps."""
    order = sorted(range(len(eps)), key=lambda i: -eps[i])
    seq = [values[i] for i in order]
    if any(v is None or not math.isfinite(v) for v in seq):
        return False
    return all(b < a for a, b in zip(seq, seq[1:]))


@dataclass
class ConvergenceReport:
    scenario: str
    epsilons: list[float]
    rows: list[dict]
    fits: list[DecayFit]
    assertions: list[Assertion]
    run_assertions: dict[str, list[dict]] = field(default_factory=dict)
    failed_runs: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Trend assertions plus every member's structural assertions."""
        runs_ok = all(
            a["passed"] for items in self.run_assertions.values() for a in items if a["name"] not in ORACLE_ASSERTIONS
        )
        return not self.failed_runs and runs_ok and all(a.passed for a in self.assertions)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "epsilons": self.epsilons,
            "rows": self.rows,
            "fits": [f.as_dict() for f in self.fits],
            "assertions": [a.as_dict() for a in self.assertions],
            "run_assertions": self.run_assertions,
            "failed_runs": self.failed_runs,
            "passed": self.passed,
        }


def build_report(results: Sequence[RunResult]) -> ConvergenceReport:
    """Trend assertions over completed runs; failed members are listed, not fitted."""
    results = sorted(results, key=lambda r: -r.eps)
    done = [r for r in results if r.status == "ok"]
    eps = [r.eps for r in done]
    rows = [{k: r.summary.get(k) for k in ROW_KEYS} for r in results]
    fits, assertions = [], []
    for metric in TREND_METRICS:
        values = [r.summary.get(metric) for r in done]
        if not values or all(v is None for v in values):
            continue
        fit = fit_decay(metric, eps, values)
        if fit is not None:
            fits.append(fit)
        decreasing = strictly_decreasing(eps, values)
        assertions.append(Assertion(f"{metric}_decreasing", float(decreasing), 1.0, ">=", decreasing))
        slope = fit.slope if fit is not None else float("nan")
        assertions.append(Assertion(f"{metric}_slope", slope, 0.0, ">", bool(slope > 0)))
    return ConvergenceReport(
        scenario=results[0].config.scenario if results else "",
        epsilons=[r.eps for r in results],
        rows=rows,
        fits=fits,
        assertions=assertions,
        run_assertions={repr(r.eps): r.summary["assertions"] for r in results},
        failed_runs=[r.eps for r in results if r.status != "ok"],
    )


def _member(args):
    cfg, eps, out = args
    return run_single(cfg, eps, out)


def run_dir_name(eps: float) -> str:
    return f"eps_{eps:g}"


def sweep(cfg: ScenarioConfig, out_dir: Optional[str | Path] = None, jobs: int = 1) -> ConvergenceReport:
    """Run every eps of ``cfg`` (in parallel when ``jobs > 1``) and fit trends."""
    check_sweep(cfg)
    out = Path(out_dir) if out_dir is not None else None
    tasks = [(cfg, eps, out / run_dir_name(eps) if out is not None else None) for eps in cfg.epsilons]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_member, tasks))
    else:
        results = [_member(t) for t in tasks]
    report = build_report(results)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(dumps_summary(report.as_dict()))
    return report


def load_sweep(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
