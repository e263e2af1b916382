"""Run every shipped experiment config through the command-line runner.

Usage: python scripts/run_all.py [--out runs] [--seed N] [--jobs N] [--only name ...]
Results land in <out>/<experiment>/. The exit status is the worst runner exit code.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from parawave import cli
from parawave.experiments import EXPERIMENTS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--only", nargs="*", choices=sorted(EXPERIMENTS), default=None)
    args = parser.parse_args(argv)

    worst = 0
    for name in args.only or list(EXPERIMENTS):
        argv_one = [name, "--config", str(CONFIGS / f"{name}.json"), "--out", str(Path(args.out) / name),
                    "--jobs", str(args.jobs)]
        if args.seed is not None:
            argv_one += ["--seed", str(args.seed)]
        print(f"== {name}", flush=True)
        start = time.perf_counter()
        code = cli.main(argv_one)
        print(f"== {name}: exit {code} in {time.perf_counter() - start:.1f} s", flush=True)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
