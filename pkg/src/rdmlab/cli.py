"""Command-line entry point.

``rdmlab <experiment> --config FILE [--jobs N] [--out DIR] [--seed S]``

Exit codes: 0 when every contract of the experiment passes, 1 when a
contract fails, 2 for configuration errors, 3 for budget or numerical
precondition errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import EXPERIMENTS, load_config
from .errors import ConfigError, RdmlabError
from .experiments import run_experiment

EXIT_OK, EXIT_CONTRACT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdmlab", description="Reduced density matrix spectral experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--jobs", type=int, default=1, help="cap on worker threads (default 1)")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides seed)")
    return p


def write_outputs(result, out_dir) -> list:
    """Write ``report.txt`` and every file of ``result`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(result.files.items()):
        (out / name).write_text(text)
        written.append(out / name)
    (out / "report.txt").write_text(result.report())
    written.append(out / "report.txt")
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.experiment)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = args.out or cfg.output_dir
    try:
        with threadpool_limits(limits=args.jobs):
            result = run_experiment(args.experiment, cfg, jobs=args.jobs)
    except RdmlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    write_outputs(result, out_dir)
    sys.stdout.write(result.report())
    return EXIT_OK if result.passed else EXIT_CONTRACT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
