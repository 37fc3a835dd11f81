"""Command-line entry point: ``stochbench {gen,run,profile,strategies,report}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import _backend
from .config import ConfigError, load_config
from .pipeline import (MissingArtifactError, SolverFailure, StageError, cmd_gen, cmd_profile, cmd_report, cmd_run,
                       cmd_strategies)

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_SOLVER = 0, 2, 3, 4

log = logging.getLogger("stochbench")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "gen": "generate Wishart planted instances",
        "run": "run the solver over instances x parameter set",
        "profile": "bootstrap sample sets into performance profiles",
        "strategies": "derive and cross-validate parameter-setting strategies",
        "report": "assemble the report tables and index",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="run config file (key = value)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--jobs", type=int, default=None, help="worker processes for solver runs")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    try:
        cfg = load_config(args.config, overrides)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        log.info("kernel backend: %s", _backend.BACKEND)
        if args.command == "gen":
            paths = cmd_gen(cfg, args.force)
            print(f"wrote {len(paths)} instances to {cfg.instances_dir}")
        elif args.command == "run":
            n = cmd_run(cfg, args.force, args.jobs)
            print(f"ran {n} (instance, parameter) jobs")
        elif args.command == "profile":
            print(f"wrote profiles to {cmd_profile(cfg)}")
        elif args.command == "strategies":
            print(f"wrote strategies to {cmd_strategies(cfg, args.force, args.jobs)}")
        elif args.command == "report":
            print(f"wrote report to {cmd_report(cfg)}")
    except (ConfigError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except SolverFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
