"""Merge run artifacts into tables, plot data files and a verdict.

Outputs in the report directory:

* ``merged.csv``: every diagnostics row, prefixed by ``scenario`` and ``epsilon``
* ``<scenario>_eps<eps>.dat``: whitespace-separated columns for gnuplot, with a
  ``#`` header naming them (same order as ``DiagnosticsRecord``)
* ``<scenario>_sweep.dat``: per-eps trend metrics, when a sweep is present
* ``verdict.json``: every assertion with value, bound and outcome
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from ..diagnostics import SCHEMA_VERSION, DiagnosticsRecord
from .runner import dumps_summary
from .sweep import TREND_METRICS


class SchemaError(ValueError):
    """Artifacts were written with an incompatible schema version."""


class UsageError(ValueError):
    """The report was asked to do something impossible (for example, no inputs)."""


def find_runs(paths: Sequence[str | Path]) -> tuple[list[Path], list[Path]]:
    """Run directories (holding ``summary.json``) and sweep files below ``paths``."""
    runs, sweeps = [], []
    for p in map(Path, paths):
        if not p.exists():
            raise UsageError(f"{p}: no such file or directory")
        if p.is_file():
            p = p.parent
        runs += sorted(s.parent for s in p.rglob("summary.json"))
        sweeps += sorted(p.rglob("sweep.json"))
    return sorted(set(runs)), sorted(set(sweeps))


def _check_schema(path: Path, data: dict) -> None:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema version {version!r}, expected {SCHEMA_VERSION}")


def report(paths: Sequence[str | Path], out_dir: str | Path) -> dict:
    """Write the merged report; returns the verdict mapping."""
    if not paths:
        raise UsageError("report needs at least one artifact path")
    runs, sweeps = find_runs(paths)
    if not runs:
        raise UsageError("no run artifacts (summary.json) found under the given paths")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summaries = []
    for run in runs:
        summary = json.loads((run / "summary.json").read_text())
        _check_schema(run / "summary.json", summary)
        summaries.append((run, summary))
    sweep_data = []
    for path in sweeps:
        data = json.loads(path.read_text())
        _check_schema(path, data)
        sweep_data.append((path, data))

    columns = DiagnosticsRecord.columns()
    with open(out / "merged.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "epsilon"] + columns)
        for run, summary in summaries:
            with open(run / "diagnostics.csv", newline="") as src:
                reader = csv.reader(src)
                header = next(reader)
                if header != columns:
                    raise SchemaError(f"{run / 'diagnostics.csv'}: column layout differs from schema {SCHEMA_VERSION}")
                rows = list(reader)
            for row in rows:
                writer.writerow([summary["scenario"], repr(summary["epsilon"])] + row)
            name = f"{summary['scenario']}_eps{summary['epsilon']:g}.dat"
            with open(out / name, "w") as dat:
                dat.write("# " + " ".join(columns) + "\n")
                for row in rows:
                    dat.write(" ".join(row) + "\n")

    for path, data in sweep_data:
        with open(out / f"{data['scenario']}_sweep.dat", "w") as dat:
            dat.write("# epsilon " + " ".join(TREND_METRICS) + "\n")
            for row in data["rows"]:
                vals = [row.get("epsilon")] + [row.get(m) for m in TREND_METRICS]
                dat.write(" ".join("nan" if v is None else repr(v) for v in vals) + "\n")

    verdict = {
        "schema_version": SCHEMA_VERSION,
        "runs": [
            {
                "path": str(run),
                "scenario": s["scenario"],
                "epsilon": s["epsilon"],
                "status": s["status"],
                "assertions": s["assertions"],
                "passed": s["passed"],
            }
            for run, s in summaries
        ],
        "sweeps": [
            {"path": str(path), "scenario": d["scenario"], "fits": d["fits"], "assertions": d["assertions"], "passed": d["passed"]}
            for path, d in sweep_data
        ],
    }
    verdict["rows"] = sum(1 for _ in open(out / "merged.csv")) - 1
    verdict["passed"] = all(r["passed"] for r in verdict["runs"]) and all(s["passed"] for s in verdict["sweeps"])
    (out / "verdict.json").write_text(dumps_summary(verdict))
    return verdict
