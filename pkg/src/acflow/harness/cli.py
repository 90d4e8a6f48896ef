"""Command-line entry point: ``acflow run|sweep|report``.

Exit codes: 0 success, 1 failed assertion (with ``--assert``), 2 configuration
or usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, parse_epsilons
from .report import SchemaError, UsageError, report
from .runner import run_single
from .sweep import run_dir_name, sweep

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("acflow")


def _print_assertions(prefix: str, assertions) -> None:
    for a in assertions:
        a = a if isinstance(a, dict) else a.as_dict()
        mark = "PASS" if a["passed"] else "FAIL"
        print(f"{mark} {prefix}{a['name']}: {a['value']} {a['relation']} {a['bound']}")


def _load(args):
    cfg = load_config(args.config)
    if args.epsilon:
        cfg = cfg.with_epsilons(parse_epsilons(args.epsilon))
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    status, passed = EXIT_OK, True
    for eps in cfg.epsilons:
        target = out / run_dir_name(eps) if len(cfg.epsilons) > 1 else out
        log.info("running %s at eps=%g into %s", cfg.scenario, eps, target)
        result = run_single(cfg, eps, target)
        _print_assertions(f"eps={eps:g} ", result.assertions)
        if result.status != "ok":
            log.error("run at eps=%g failed: %s", eps, result.error)
            status = EXIT_RUNTIME
        passed &= result.passed
    if status:
        return status
    return EXIT_ASSERT if args.assert_ and not passed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rep = sweep(cfg, args.out, jobs=args.jobs)
    for eps, items in rep.run_assertions.items():
        _print_assertions(f"eps={float(eps):g} ", items)
    _print_assertions("sweep ", rep.assertions)
    for fit in rep.fits:
        lo, hi = fit.ci95
        print(f"fit {fit.metric}: slope {fit.slope:.3f} (95% CI {lo:.3f} .. {hi:.3f})")
    if rep.failed_runs:
        log.error("failed runs at eps=%s", rep.failed_runs)
        return EXIT_RUNTIME
    return EXIT_ASSERT if args.assert_ and not rep.passed else EXIT_OK


def cmd_report(args) -> int:
    verdict = report(args.paths, args.out)
    for run in verdict["runs"]:
        _print_assertions(f"{run['scenario']} eps={run['epsilon']:g} ", run["assertions"])
    for sw in verdict["sweeps"]:
        _print_assertions(f"{sw['scenario']} sweep ", sw["assertions"])
    print(f"merged {verdict['rows']} rows into {Path(args.out) / 'merged.csv'}")
    return EXIT_ASSERT if args.assert_ and not verdict["passed"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acflow", description="Phase-field runs, eps-sweeps and reports.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="scenario YAML file")
            p.add_argument("--epsilon", help="comma-separated eps list overriding the config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--assert", dest="assert_", action="store_true", help="exit 1 when any assertion fails")

    common(sub.add_parser("run", help="run every eps of a config"))
    p = sub.add_parser("sweep", help="eps-sweep with fitted decay exponents")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel member runs")
    p = sub.add_parser("report", help="merge run artifacts")
    p.add_argument("paths", nargs="*", help="run or sweep directories")
    common(p, needs_config=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
