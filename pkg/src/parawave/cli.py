"""Command-line runner: ``parawave <experiment> --config <path> [--out <dir>] [--seed <n>] [--jobs <n>]``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, ConvergenceError
from .experiments import EXPERIMENTS, Report, config_dict, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
OUT_ENV = "PARAWAVE_OUT"


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table(path: Path, rows: list[dict[str, Any]]) -> None:
    columns: list[str] = []
    for row in rows:
        columns += [k for k in row if k not in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(out_dir: Path, experiment: str, config: dict[str, Any], seed: int, report: Report) -> Path:
    """CSV per table, checks.csv, and manifest.json listing parameters, seed, versions and file digests."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, rows in sorted(report.tables.items()) + [("checks", report.checks)]:
        path = out_dir / f"{name}.csv"
        write_table(path, rows)
        files[path.name] = _sha256(path)
    manifest = {
        "experiment": experiment,
        "seed": seed,
        "config": config,
        "versions": {"parawave": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "all_checks_passed": report.all_passed,
        "outputs": files,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_config(path: str) -> dict[str, Any]:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config", "the config file must hold a JSON object")
    return raw


def resolve_seed(raw: dict[str, Any], override: int | None) -> int:
    if override is not None:
        return override
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {seed!r}")
    return seed


def run(experiment: str, config_path: str, out: str | None = None, seed: int | None = None,
        jobs: int = 1) -> tuple[Report, Path]:
    """Validate, execute and write one experiment; raises ConfigError or ConvergenceError."""
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r} (known: {', '.join(EXPERIMENTS)})")
    if jobs < 1:
        raise ConfigError("jobs", "must be at least 1")
    raw = read_config(config_path)
    named = raw.get("experiment", experiment)
    if named != experiment:
        raise ConfigError("experiment", f"config is for {named!r}, not {experiment!r}")
    spec = EXPERIMENTS[experiment]
    cfg = load_config(spec.config, raw)
    seed = resolve_seed(raw, seed)
    report = spec.run(cfg, seed, jobs)
    out_dir = Path(os.environ.get(OUT_ENV) or out or Path("runs") / experiment)
    manifest = write_outputs(out_dir, experiment, config_dict(cfg), seed, report)
    return report, manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parawave", description="Run a named numerical experiment.")
    parser.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    parser.add_argument("--config", required=True, help="JSON parameter file")
    parser.add_argument("--out", default=None, help=f"output directory (the {OUT_ENV} variable takes precedence)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides the config value)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for independent work items")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, manifest = run(args.experiment, args.config, args.out, args.seed, args.jobs)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    for c in report.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['check']}: value={_cell(c['value'])} target={_cell(c['target'])} "
              f"tolerance={_cell(c['tolerance'])}")
    print(f"wrote {manifest}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
