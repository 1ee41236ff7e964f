"""Command-line driver: ``qfieldlab {run,list,validate}``.

Exit status: 0 when every check passed (or list/validate succeeded), 1 when
a check failed, 2 for usage and config errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .lab import (EXPERIMENT_IDS, ConfigError, load_config, run_experiment,
                  validate_config)

log = logging.getLogger("qfieldlab")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class CliInvocation:
    subcommand: str
    experiment: str | None = None
    config: Path | None = None
    out: Path | None = None
    seed: int | None = None
    verbose: bool = False


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits unsigned: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qfieldlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment")
    run.add_argument("--config", type=Path, required=True)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--seed", type=_u64)
    run.add_argument("--verbose", action="store_true")
    sub.add_parser("list", help="print registered experiment ids")
    val = sub.add_parser("validate", help="parse and check a config without running it")
    val.add_argument("--config", type=Path, required=True)
    val.add_argument("--verbose", action="store_true")
    return p


def parse_args(argv) -> CliInvocation:
    ns = build_parser().parse_args(argv)
    inv = CliInvocation(ns.subcommand, getattr(ns, "experiment", None), getattr(ns, "config", None),
                        getattr(ns, "out", None), getattr(ns, "seed", None),
                        getattr(ns, "verbose", False))
    if inv.subcommand == "run" and inv.experiment not in EXPERIMENT_IDS:
        raise UsageError(f"unknown experiment {inv.experiment!r}; registered: "
                         + ", ".join(EXPERIMENT_IDS))
    return inv


def dispatch(inv: CliInvocation) -> int:
    if inv.subcommand == "list":
        for exp in EXPERIMENT_IDS:
            print(exp)
        return EXIT_OK
    try:
        config = load_config(inv.config)
        if inv.subcommand == "validate":
            validate_config(config)
            print(f"{inv.config}: ok ({config['run']['experiment']})")
            return EXIT_OK
        manifest = run_experiment(inv.experiment, config, inv.out, seed=inv.seed)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    for line in manifest.summary_lines():
        log.info(line)
    print(f"{manifest.experiment}: {'PASS' if manifest.passed else 'FAIL'} "
          f"({sum(c.passed for c in manifest.checks)}/{len(manifest.checks)} checks); "
          f"manifest at {inv.out / 'manifest.json'}")
    return EXIT_OK if manifest.passed else EXIT_FAILED


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        inv = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if inv.verbose else logging.WARNING,
                        format="%(message)s")
    return dispatch(inv)


if __name__ == "__main__":
    sys.exit(main())
