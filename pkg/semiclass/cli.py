#!/usr/bin/env python3
"""
semiclass command line

    semiclass run --experiment green-defect --config experiments/green_defect.yaml --out results
    semiclass list
    semiclass catalog

Exit codes: 0 all verdicts pass, 2 a verdict failed, 3 configuration error,
1 any other failure (for example an unwritable output directory).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .catalog import list_catalog
from .errors import ConfigError, SemiclassError
from .harness import list_experiments, load_config, run_experiment
from .report import emit_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VERDICT = 2
EXIT_CONFIG = 3


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def cmd_run(args) -> int:
    overrides = {}
    if args.out:
        overrides["output"] = args.out
    if args.timing:
        overrides["timing"] = True
    cfg = load_config(Path(args.config) if args.config else None, args.experiment, overrides)

    logger.info("=" * 60)
    logger.info(f"Experiment: {cfg.experiment}")
    logger.info(f"hbar schedule: {', '.join(f'{h:g}' for h in cfg.hbar.schedule)}")
    logger.info("=" * 60)

    report = run_experiment(cfg)
    emit_report(report, cfg.output, args.format, include_timing=cfg.timing)

    logger.info("=" * 60)
    for verdict in report.verdicts:
        mark = "PASS" if verdict.passed else "FAIL"
        logger.info(f"  [{mark}] {verdict.name}: {verdict.value!r} (threshold {verdict.threshold!r})")
    logger.info(report.summary())
    logger.info("=" * 60)
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_list(args) -> int:
    for item in list_experiments():
        print(f"{item['name']:28s} {item['description']}")
    return EXIT_OK


def cmd_catalog(args) -> int:
    entries = list_catalog()
    if args.json:
        print(json.dumps(entries, indent=2, sort_keys=True))
        return EXIT_OK
    for entry in entries:
        params = ",".join(f"{k}={v:g}" for k, v in entry["defaults"].items())
        print(f"{entry['name']:8s} {entry['kind']:7s} {params:40s} {entry['description']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='semiclass',
                                     description='Semiclassical half-space operator experiments')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--log-file', help='Also log to this file')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run one experiment and write its report')
    run.add_argument('--experiment', '-e', help='Experiment id (see `semiclass list`)')
    run.add_argument('--config', '-c', help='YAML configuration file')
    run.add_argument('--out', '-o', help='Output directory (overrides the config)')
    run.add_argument('--format', default='csv+json', choices=['csv', 'json', 'csv+json'],
                     help='Report files to write')
    run.add_argument('--timing', action='store_true', help='Fill the wall_ms column')
    run.set_defaults(handler=cmd_run)

    lister = sub.add_parser('list', help='List experiments')
    lister.set_defaults(handler=cmd_list)

    catalog = sub.add_parser('catalog', help='List catalogue symbols and kernels')
    catalog.add_argument('--json', action='store_true', help='Machine-readable output')
    catalog.set_defaults(handler=cmd_catalog)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except SemiclassError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
