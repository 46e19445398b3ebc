"""
Command line entry point: run a contamination experiment described by a YAML
config and write its result files.
"""

import argparse
import logging
import sys

from pycontamination.experiment_config import ConfigError, ExperimentConfig
from pycontamination.logging_config import configure_logging
from pycontamination.results import FORMATS
from pycontamination.runner import run


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(
        prog="run-contamination",
        description="Contamination attack and defense experiments for multi-party learning.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    run_parser = subparsers.add_parser("run", help="Run every scenario of a config")
    run_parser.add_argument("config", type=str, help="Path to YAML configuration file")
    run_parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value, e.g. model.epochs=5 (repeatable)",
    )
    run_parser.add_argument("--out", type=str, default=None, help="Output directory")
    run_parser.add_argument(
        "--jobs", type=int, default=1, help="Scenario-repetitions run in parallel"
    )
    run_parser.add_argument(
        "--format", choices=FORMATS, default="csv", help="Also write results.yaml with yaml"
    )
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_arguments(argv)

    try:
        cfg = ExperimentConfig(args.config, overrides=args.override)
    except ConfigError as e:
        logging.getLogger("pycontamination").error(str(e))
        print(e, file=sys.stderr)
        return 2

    out_dir = args.out or cfg.output_dir
    logger = configure_logging(out_dir)

    if not cfg.is_config_valid():
        try:
            cfg.validate()
        except ConfigError as e:
            logger.error(f"Config not valid, exiting: {e}")
        return 2

    logger.info(f"Config loaded from {args.config}, writing to {out_dir}")
    paths = run(cfg, out_dir=out_dir, jobs=args.jobs, fmt=args.format)
    for name, path in paths.items():
        logger.info(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
