#!/usr/bin/env python3
"""
Truncation calibration

Runs one experiment at its configured normal extent L_n and again at 2 L_n, then
prints the relative change of every row. Small changes mean the domain cut-off
does not affect the reported values.
"""

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

sys.path.insert(0, str(Path(__file__).parent.parent))

from semiclass.errors import ConfigError, SemiclassError  # noqa: E402
from semiclass.harness import ExperimentConfig, load_config, run_experiment  # noqa: E402

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(message)s')
logger = logging.getLogger(__name__)


def doubled(cfg: ExperimentConfig) -> ExperimentConfig:
    """Same experiment with twice the normal extent and room for the extra nodes."""
    grid = replace(cfg.grid, normal_extent=2 * cfg.grid.normal_extent,
                   max_points=2 * cfg.grid.max_points)
    boundary = replace(cfg.boundary, line_extent=2 * cfg.boundary.line_extent)
    return replace(cfg, grid=grid, boundary=boundary)


def relative_changes(base_values: List[float], wide_values: List[float]) -> List[float]:
    changes = []
    for a, b in zip(base_values, wide_values):
        if not (math.isfinite(a) and math.isfinite(b)):
            changes.append(math.nan)
        elif max(abs(a), abs(b)) == 0:
            changes.append(0.0)
        else:
            changes.append(abs(a - b) / max(abs(a), abs(b)))
    return changes


def calibrate(cfg: ExperimentConfig) -> List[Tuple[Optional[float], float, float, float]]:
    base = run_experiment(cfg).sorted_rows()
    wide = run_experiment(doubled(cfg)).sorted_rows()
    changes = relative_changes([r.value for r in base], [r.value for r in wide])
    return [(r.hbar, r.value, w.value, c) for r, w, c in zip(base, wide, changes)]


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description='Compare an experiment at L_n and 2 L_n')
    parser.add_argument('--experiment', '-e', help='Experiment id')
    parser.add_argument('--config', '-c', help='YAML configuration file')
    parser.add_argument('--tolerance', type=float, default=1e-2,
                        help='Largest acceptable relative change')
    args = parser.parse_args(argv)

    try:
        cfg = load_config(Path(args.config) if args.config else None, args.experiment)
        rows = calibrate(cfg)
    except ConfigError as e:
        logger.error(str(e))
        return 3
    except SemiclassError as e:
        logger.error(str(e))
        return 1

    print("=" * 60)
    print(f"TRUNCATION CALIBRATION: {cfg.experiment} (L_n = {cfg.grid.normal_extent:g} vs "
          f"{2 * cfg.grid.normal_extent:g})")
    print("=" * 60)
    worst = 0.0
    for hbar, base, wide, change in rows:
        label = "-" if hbar is None else f"{hbar:g}"
        print(f"  hbar={label:>10s}  {base:.10g}  {wide:.10g}  change {change:.2e}")
        if math.isfinite(change):
            worst = max(worst, change)
    print(f"Largest relative change: {worst:.2e} (tolerance {args.tolerance:g})")
    return 0 if worst <= args.tolerance else 2


if __name__ == '__main__':
    sys.exit(main())
