"""
Experiment registry, hbar sweeps and configuration loading.

Every experiment reads an ``ExperimentConfig`` and returns a ``ConvergenceReport``.
Sweep rows are independent: they run concurrently in worker threads and are reduced
in schedule order, so reports never depend on completion order.
"""

import asyncio
import copy
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import yaml

from .catalog import resolve_kernel, resolve_symbol
from .config import DECOMPOSITION_PAIRS, DEFAULT_CONFIG, SAMPLES_FACTOR
from .errors import ConfigError, GridError, SemiclassError
from .operators import (
    DiscreteOperator,
    Operator,
    assemble_element,
    assemble_kappa,
    assemble_pi0_boundary,
    assemble_rho,
    boundary_projection,
    compose,
    compress,
    grid_for_hbar,
    operator_norm,
    slab_thickness,
    truncation_window,
)
from .report import (
    ConvergenceReport,
    ReportRow,
    bound_verdict,
    empirical_rate,
    final_relative_error,
    monotone_trend,
    ratio_verdict,
)
from .symbolics import (
    BoundaryElement,
    BoundaryKernel,
    HalfSpaceGrid,
    Symbol,
    convolve_symbols,
    convolve_symbols_hbar,
    covariable_grid,
    leftover_l,
    leftover_l_hbar,
    make_grid,
    make_interior_grid,
    star_prime,
    sup_norm_reference,
    zero_kernel,
)
from .toeplitz import (
    cayley_symbol,
    commutator_compactness,
    equivalence_report,
    section_norms,
)
from .utils import thread_count

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).parent.parent / "schema" / "experiment.schema.json"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    dim: int
    normal_extent: float
    tangential_extent: float
    resolution: float
    max_points: int
    tangential_points: int


@dataclass(frozen=True)
class HbarConfig:
    start: float
    halvings: int

    @property
    def schedule(self) -> List[float]:
        return [self.start * 2.0 ** (-k) for k in range(self.halvings + 1)]


@dataclass(frozen=True)
class NormConfig:
    method: str
    tol: float
    max_iter: int
    seed: int

    def options(self) -> Dict[str, Any]:
        return {"method": self.method, "tol": self.tol, "max_iter": self.max_iter, "seed": self.seed}


@dataclass(frozen=True)
class BoundaryConfig:
    line_extent: float
    line_step: float
    frequency_extent: float
    frequency_points: int


@dataclass(frozen=True)
class ToeplitzConfig:
    sizes: Tuple[int, ...]
    line_extent: float
    line_step: float
    top: int
    psi: str


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    grid: GridConfig
    hbar: HbarConfig
    norm: NormConfig
    f: str
    g: str
    pairs: Tuple[Tuple[str, str], ...]
    kernel: str
    elements: Tuple[Tuple[str, str], ...]
    beta: float
    boundary: BoundaryConfig
    toeplitz: ToeplitzConfig
    refinement_check: bool
    timing: bool
    thresholds: Dict[str, float] = field(hash=False)
    output: str = "results"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def deep_merge(base: Dict, override: Optional[Dict]) -> Dict:
    """Recursive dict merge; values in ``override`` win, lists are replaced."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _load_schema() -> dict:
    with open(SCHEMA_PATH, 'r', encoding='utf-8') as f:
        return json.load(f)


def validate_tree(tree: Dict, source: str = "configuration"):
    try:
        jsonschema.validate(tree, _load_schema())
    except jsonschema.ValidationError as e:
        location = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"Invalid {source} at {location}: {e.message}") from None


def read_config_file(path: Path) -> Dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            tree = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e.strerror or e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed YAML in {path}: {e}") from None
    if not isinstance(tree, dict):
        raise ConfigError(f"Config {path} must hold a mapping at the top level")
    return tree


def build_config(tree: Dict) -> ExperimentConfig:
    """Turn a fully merged key tree into an ``ExperimentConfig``, checking cross-field rules."""
    name = tree.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment {name!r}; known: {', '.join(sorted(EXPERIMENTS))}")

    grid = GridConfig(**tree["grid"])
    hbar = HbarConfig(**tree["hbar"])
    if not 0 < hbar.start <= 1:
        raise ConfigError(f"hbar.start must lie in (0, 1], got {hbar.start}")
    if hbar.halvings < 0:
        raise ConfigError(f"hbar.halvings must be >= 0, got {hbar.halvings}")
    beta = float(tree["beta"])
    if not 0 < beta < 1:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")

    symbols = tree["symbols"]
    toeplitz_tree = dict(tree["toeplitz"])
    toeplitz_tree["sizes"] = tuple(int(s) for s in toeplitz_tree["sizes"])
    cfg = ExperimentConfig(
        experiment=name,
        grid=grid,
        hbar=hbar,
        norm=NormConfig(**tree["norm"]),
        f=symbols["f"],
        g=symbols["g"],
        pairs=tuple(tuple(p) for p in symbols["pairs"]),
        kernel=tree["kernel"]["id"],
        elements=tuple(tuple(e) for e in tree["elements"]),
        beta=beta,
        boundary=BoundaryConfig(**tree["boundary"]),
        toeplitz=ToeplitzConfig(**toeplitz_tree),
        refinement_check=bool(tree["refinement_check"]),
        timing=bool(tree["timing"]),
        thresholds=dict(tree["thresholds"]),
        output=str(tree["output"]),
    )

    # every referenced catalogue id must resolve
    dim = grid.dim
    resolve_symbol(cfg.f, dim)
    resolve_symbol(cfg.g, dim)
    resolve_kernel(cfg.kernel, dim)
    resolve_symbol(cfg.toeplitz.psi, 1)
    for a, b in cfg.pairs:
        resolve_symbol(a, 1)
        resolve_symbol(b, 1)
    for s, k in cfg.elements:
        resolve_symbol(s, 1)
        resolve_kernel(k, 1)
    return cfg


def load_config(path: Optional[Path] = None, experiment: Optional[str] = None,
                overrides: Optional[Dict] = None) -> ExperimentConfig:
    """
    Defaults, then the experiment's own defaults, then the file, then ``overrides``.

    The file and the merged tree are both validated against the experiment schema.
    """
    file_tree = read_config_file(Path(path)) if path else {}
    if file_tree:
        validate_tree(file_tree, f"config {path}")

    name = experiment or (overrides or {}).get("experiment") or file_tree.get("experiment")
    if not name:
        raise ConfigError("No experiment given (use --experiment or the 'experiment' key)")
    if name not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment {name!r}; known: {', '.join(sorted(EXPERIMENTS))}")

    tree = deep_merge(DEFAULT_CONFIG, EXPERIMENTS[name].defaults)
    tree = deep_merge(tree, file_tree)
    tree = deep_merge(tree, overrides)
    tree["experiment"] = name
    validate_tree(tree)
    return build_config(tree)


# ---------------------------------------------------------------------------
# Sweep driver
# ---------------------------------------------------------------------------

RowTask = Callable[[float], ReportRow]


def _timed_row(experiment: str, hbar: float, task: RowTask) -> ReportRow:
    started = time.perf_counter()
    try:
        row = task(hbar)
    except SemiclassError as e:
        logger.warning(f"{experiment}: row hbar={hbar:g} degraded: {e}")
        row = ReportRow.degraded(experiment, hbar, str(e))
    row.wall_ms = (time.perf_counter() - started) * 1000
    if row.ok:
        logger.info(f"{experiment}: hbar={hbar:g} value={row.value:.8g}")
    return row


async def sweep(experiment: str, schedule: Sequence[float], task: RowTask,
                threads: Optional[int] = None) -> List[ReportRow]:
    """Evaluate one row per hbar in worker threads; results keep schedule order."""
    semaphore = asyncio.Semaphore(threads or thread_count())

    async def run_one(hbar: float) -> ReportRow:
        async with semaphore:
            return await asyncio.to_thread(_timed_row, experiment, hbar, task)

    return list(await asyncio.gather(*(run_one(h) for h in schedule)))


def run_sweep(experiment: str, schedule: Sequence[float], task: RowTask) -> List[ReportRow]:
    return asyncio.run(sweep(experiment, schedule, task))


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def _norm(op: Operator, cfg: ExperimentConfig) -> float:
    return operator_norm(op, **cfg.norm.options()).value


def _radius(*items) -> float:
    """Smallest decay radius among the nonzero symbols/kernels; sets the grid spacing."""
    radii = [i.decay_radius for i in items if not i.is_zero]
    return min(radii) if radii else 1.0


def _grid(cfg: ExperimentConfig, hbar: float, radius: float, interior: bool = False,
          resolution: Optional[float] = None) -> HalfSpaceGrid:
    g = cfg.grid
    return grid_for_hbar(g.dim, hbar, radius, g.normal_extent,
                         tangential_extent=g.tangential_extent if g.dim == 2 else None,
                         resolution=resolution or g.resolution, max_points=g.max_points,
                         interior=interior)


def _needs_window(*symbols: Symbol) -> bool:
    return any(s.base_radius is None for s in symbols if not s.is_zero)


def _windowed(op: DiscreteOperator, grid: HalfSpaceGrid, margin: Optional[float]) -> DiscreteOperator:
    """Measure away from artificial cut ends when the symbols are not localized in the base."""
    if margin is None:
        return op
    return compress(truncation_window(grid, margin), op)


def _base_reference_grid(cfg: ExperimentConfig, interior: bool) -> HalfSpaceGrid:
    g = cfg.grid
    if interior:
        return make_interior_grid(g.dim, g.normal_extent, 257 if g.dim == 1 else 33, g.tangential_extent)
    return make_grid(g.dim, g.normal_extent, g.tangential_extent if g.dim == 2 else None,
                     129 if g.dim == 1 else 17)


def boundary_line(cfg: ExperimentConfig) -> HalfSpaceGrid:
    b = cfg.boundary
    points = int(round(b.line_extent / b.line_step)) + 1
    if cfg.grid.dim == 1:
        return make_grid(1, b.line_extent, points=points)
    return make_grid(2, b.line_extent, cfg.grid.tangential_extent, (points, cfg.grid.tangential_points))


def pi0_boundary_norm(f: Symbol, kernel: BoundaryKernel, cfg: ExperimentConfig) -> float:
    b = cfg.boundary
    options = {}
    if cfg.grid.dim == 2:
        options["frequencies"] = covariable_grid(1, b.frequency_extent, b.frequency_points)[:, 0]
    return _norm(assemble_pi0_boundary(f, kernel, boundary_line(cfg), **options), cfg)


def _new_report(cfg: ExperimentConfig) -> ConvergenceReport:
    return ConvergenceReport(cfg.experiment, config=cfg.to_dict())


def _pairs(rows: Sequence[ReportRow], key: str = "value") -> List[Tuple[float, float]]:
    out = []
    for r in rows:
        value = getattr(r, key) if key == "value" else r.extra.get(key, math.nan)
        out.append((r.hbar, value if r.ok else math.nan))
    return out


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_norm_limit_interior(cfg: ExperimentConfig) -> ConvergenceReport:
    """||rho_hbar(f)|| on the full space against sup |f^|."""
    f = resolve_symbol(cfg.f, cfg.grid.dim)
    reference = sup_norm_reference(f, _base_reference_grid(cfg, interior=True).nodes)
    report = _new_report(cfg)

    def row(hbar: float) -> ReportRow:
        grid = _grid(cfg, hbar, _radius(f), interior=True)
        value = _norm(assemble_rho(f, hbar, grid, resolution=cfg.grid.resolution), cfg)
        return ReportRow(cfg.experiment, hbar, value, reference, extra={"nodes": grid.size})

    report.rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
    final_relative_error(report, cfg.thresholds["final_relative_error"])
    report.details["rate"] = empirical_rate([(r.hbar, r.defect) for r in report.rows if r.ok])
    return report


def run_norm_limit_boundary(cfg: ExperimentConfig) -> ConvergenceReport:
    """||rho_hbar(f) + kappa_hbar(K)|| against max(||pi0(f)||, ||pi0_boundary(f, K)||)."""
    dim = cfg.grid.dim
    f = resolve_symbol(cfg.f, dim)
    kernel = resolve_kernel(cfg.kernel, dim)

    interior_norm = sup_norm_reference(f, _base_reference_grid(cfg, interior=False).nodes)
    if f.is_zero and kernel.reference_norm is not None:
        boundary_norm = kernel.reference_norm
    else:
        boundary_norm = pi0_boundary_norm(f, kernel, cfg)
    reference = max(interior_norm, boundary_norm)
    report = _new_report(cfg)
    report.details.update({"pi0_norm": interior_norm, "pi0_boundary_norm": boundary_norm})

    def row(hbar: float) -> ReportRow:
        grid = _grid(cfg, hbar, _radius(f, kernel))
        op = assemble_element(BoundaryElement(f, kernel), hbar, grid, resolution=cfg.grid.resolution)
        return ReportRow(cfg.experiment, hbar, _norm(op, cfg), reference, extra={"nodes": grid.size})

    report.rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
    final_relative_error(report, cfg.thresholds["final_relative_error"])
    if f.is_zero and kernel.reference_norm is not None:
        worst = max((r.defect / reference if reference else r.defect for r in report.rows if r.ok),
                    default=math.nan)
        bound_verdict(report, "rank_one_every_row", worst, cfg.thresholds["rank_one_relative_error"])
    return report


def _pair(cfg: ExperimentConfig) -> Tuple[Symbol, Symbol]:
    return resolve_symbol(cfg.f, cfg.grid.dim), resolve_symbol(cfg.g, cfg.grid.dim)


def decomposition_terms(f: Symbol, g: Symbol, hbar: float, grid: HalfSpaceGrid,
                        resolution: float) -> Dict[str, DiscreteOperator]:
    """The operators entering the Green defect and the exact decomposition at one hbar."""
    options = {"resolution": resolution}
    rho_f = assemble_rho(f, hbar, grid, **options)
    rho_g = assemble_rho(g, hbar, grid, **options)
    return {
        "rho_f": rho_f,
        "rho_g": rho_g,
        "product": compose(rho_f, rho_g),
        "rho_conv": assemble_rho(convolve_symbols(f, g), hbar, grid, **options),
        "rho_conv_hbar": assemble_rho(convolve_symbols_hbar(f, g, hbar), hbar, grid, **options),
        "kappa_l": assemble_kappa(leftover_l(f, g), hbar, grid, **options),
        "kappa_l_hbar": assemble_kappa(leftover_l_hbar(f, g, hbar), hbar, grid, **options),
    }


def exact_residual(f: Symbol, g: Symbol, hbar: float, grid: HalfSpaceGrid, resolution: float,
                   cfg: ExperimentConfig) -> Tuple[float, float]:
    """(residual, ||rho(f)|| ||rho(g)||) for the exact decomposition at one hbar."""
    t = decomposition_terms(f, g, hbar, grid, resolution)
    margin = hbar * (f.decay_radius + g.decay_radius) if _needs_window(f, g) else None
    residual = _windowed(t["product"] - t["rho_conv_hbar"] - t["kappa_l_hbar"], grid, margin)
    return _norm(residual, cfg), _norm(t["rho_f"], cfg) * _norm(t["rho_g"], cfg)


def pair_residuals(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """
    Relative exact-decomposition residual for every configured pair over the hbar schedule.

    An hbar the grid cannot resolve, or whose window leaves no nodes, is skipped for that
    pair only.
    """
    dim = cfg.grid.dim
    checked = []
    for f_id, g_id in cfg.pairs:
        f = resolve_symbol(f_id, dim)
        g = resolve_symbol(g_id, dim)

        def row(hbar: float, f: Symbol = f, g: Symbol = g) -> ReportRow:
            grid = _grid(cfg, hbar, _radius(f, g))
            residual, scale = exact_residual(f, g, hbar, grid, cfg.grid.resolution, cfg)
            return ReportRow(cfg.experiment, hbar, residual / scale if scale else residual)

        rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
        values = [r.value for r in rows if r.ok]
        checked.append({"f": f_id, "g": g_id, "evaluated": len(values),
                        "worst": max(values, default=math.nan)})
    return checked


def run_green_defect(cfg: ExperimentConfig) -> ConvergenceReport:
    """
    D(hbar) = ||rho(f) rho(g) - rho(f*g) - kappa(l(f,g))|| with the exact-decomposition
    residual as a companion column.
    """
    f, g = _pair(cfg)
    report = _new_report(cfg)
    resolution = cfg.grid.resolution

    def row(hbar: float) -> ReportRow:
        grid = _grid(cfg, hbar, _radius(f, g))
        t = decomposition_terms(f, g, hbar, grid, resolution)
        margin = hbar * (f.decay_radius + g.decay_radius) if _needs_window(f, g) else None
        defect = _norm(_windowed(t["product"] - t["rho_conv"] - t["kappa_l"], grid, margin), cfg)
        residual = _norm(_windowed(t["product"] - t["rho_conv_hbar"] - t["kappa_l_hbar"], grid, margin), cfg)
        scale = _norm(t["rho_f"], cfg) * _norm(t["rho_g"], cfg)
        return ReportRow(cfg.experiment, hbar, defect,
                         extra={"residual": residual, "scale": scale, "nodes": grid.size})

    report.rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
    th = cfg.thresholds
    values = _pairs(report.rows)
    monotone_trend(report, values, cfg.hbar.halvings, th["monotone_slack"])
    ratio_verdict(report, "final_vs_initial", values[-1][1], values[0][1], th["defect_ratio"])

    worst = max((r.extra["residual"] / r.extra["scale"] if r.extra["scale"] else 0.0
                 for r in report.rows if r.ok), default=math.nan)
    bound_verdict(report, "exact_decomposition", worst, th["decomposition_relative"])

    if cfg.pairs:
        checked = pair_residuals(cfg)
        report.details["pairs"] = checked
        relative = [c["worst"] for c in checked if c["evaluated"]]
        skipped = [f"{c['f']}, {c['g']}" for c in checked if not c["evaluated"]]
        bound_verdict(report, "exact_decomposition_pairs",
                      max(relative) if relative and not skipped else math.nan,
                      th["decomposition_relative"],
                      detail=f"no admissible hbar for {'; '.join(skipped)}" if skipped else "")

    if cfg.refinement_check:
        hbar = cfg.hbar.start
        coarse, _ = exact_residual(f, g, hbar, _grid(cfg, hbar, _radius(f, g)), resolution, cfg)
        fine_grid = _grid(cfg, hbar, _radius(f, g), resolution=2 * resolution)
        fine, _ = exact_residual(f, g, hbar, fine_grid, 2 * resolution, cfg)
        report.details["refinement"] = {"coarse": coarse, "fine": fine}
        ratio_verdict(report, "refinement_gain", coarse, fine, th["refinement_gain"], at_most=False)
    report.details["rate"] = empirical_rate([(h, v) for h, v in values])
    return report


def run_vanishing_difference(cfg: ExperimentConfig) -> ConvergenceReport:
    """||rho(f *_hbar g - f*g) + kappa(l_hbar - l)||: the element that vanishes at hbar = 0."""
    f, g = _pair(cfg)
    report = _new_report(cfg)

    def row(hbar: float) -> ReportRow:
        grid = _grid(cfg, hbar, _radius(f, g))
        t = decomposition_terms(f, g, hbar, grid, cfg.grid.resolution)
        margin = hbar * (f.decay_radius + g.decay_radius) if _needs_window(f, g) else None
        diff = (t["rho_conv_hbar"] - t["rho_conv"]) + (t["kappa_l_hbar"] - t["kappa_l"])
        return ReportRow(cfg.experiment, hbar, _norm(_windowed(diff, grid, margin), cfg),
                         extra={"nodes": grid.size})

    report.rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
    values = _pairs(report.rows)
    monotone_trend(report, values, cfg.hbar.halvings, cfg.thresholds["monotone_slack"])
    ratio_verdict(report, "final_vs_initial", values[-1][1], values[0][1], cfg.thresholds["defect_ratio"])
    report.details["rate"] = empirical_rate(values)
    return report


def run_interior_multiplicativity(cfg: ExperimentConfig) -> ConvergenceReport:
    """||rho(f) rho(g) - rho(f*g)|| on the full space."""
    f, g = _pair(cfg)
    report = _new_report(cfg)

    def row(hbar: float) -> ReportRow:
        grid = _grid(cfg, hbar, _radius(f, g), interior=True)
        options = {"resolution": cfg.grid.resolution}
        product = compose(assemble_rho(f, hbar, grid, **options), assemble_rho(g, hbar, grid, **options))
        diff = product - assemble_rho(convolve_symbols(f, g), hbar, grid, **options)
        margin = hbar * (f.decay_radius + g.decay_radius) if _needs_window(f, g) else None
        return ReportRow(cfg.experiment, hbar, _norm(_windowed(diff, grid, margin), cfg),
                         extra={"nodes": grid.size})

    report.rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
    values = _pairs(report.rows)
    monotone_trend(report, values, cfg.hbar.halvings, cfg.thresholds["monotone_slack"])
    ratio_verdict(report, "final_vs_initial", values[-1][1], values[0][1], cfg.thresholds["defect_ratio"])
    report.details["rate"] = empirical_rate(values)
    return report


def run_boundary_compression(cfg: ExperimentConfig) -> ConvergenceReport:
    """||P (rho(f) + kappa(K)) P|| against ||pi0_boundary(f, K)|| with slab a = hbar^beta."""
    dim = cfg.grid.dim
    f = resolve_symbol(cfg.f, dim)
    kernel = resolve_kernel(cfg.kernel, dim)
    if f.is_zero and kernel.reference_norm is not None:
        reference = kernel.reference_norm
    else:
        reference = pi0_boundary_norm(f, kernel, cfg)
    report = _new_report(cfg)

    def row(hbar: float) -> ReportRow:
        grid = _grid(cfg, hbar, _radius(f, kernel))
        thickness = slab_thickness(hbar, cfg.beta)
        if thickness < grid.normal_spacing:
            raise GridError(f"Slab a={thickness:g} is thinner than the spacing {grid.normal_spacing:g}")
        op = assemble_element(BoundaryElement(f, kernel), hbar, grid, resolution=cfg.grid.resolution)
        projection = boundary_projection(hbar, grid, cfg.beta)
        compressed = _norm(compress(projection, op), cfg)
        full = _norm(op, cfg)
        return ReportRow(cfg.experiment, hbar, compressed, reference,
                         extra={"full": full, "slab": thickness, "nodes": grid.size})

    report.rows = run_sweep(cfg.experiment, cfg.hbar.schedule, row)
    th = cfg.thresholds
    valid = [r for r in report.rows if r.ok]
    final = valid[-1].value if valid else math.nan
    ratio_verdict(report, "final_fraction", final, reference, th["compression_fraction"], at_most=False)
    excess = max((r.value - r.extra["full"] * (1 + th["monotone_slack"]) for r in valid), default=math.nan)
    bound_verdict(report, "compression_below_full", excess, 0.0)
    return report


def run_quotient_bound(cfg: ExperimentConfig) -> ConvergenceReport:
    """||pi0_boundary(f, K)|| - sup |f^(0, .)| >= -slack for every configured element."""
    report = _new_report(cfg)
    th = cfg.thresholds
    worst = math.inf
    equality_gaps = []
    for index, (symbol_id, kernel_id) in enumerate(cfg.elements):
        f = resolve_symbol(symbol_id, 1)
        kernel = resolve_kernel(kernel_id, 1)
        try:
            value = pi0_boundary_norm(f, kernel, cfg)
        except SemiclassError as e:
            logger.warning(f"quotient-bound: element {symbol_id} + {kernel_id} degraded: {e}")
            report.rows.append(ReportRow.degraded(cfg.experiment, None, str(e)))
            continue
        sup = sup_norm_reference(f, np.zeros((1, 1)))
        gap = value - sup
        worst = min(worst, gap)
        if kernel.is_zero and sup > 0:
            equality_gaps.append(abs(gap) / sup)
        report.rows.append(ReportRow(cfg.experiment, None, value, sup,
                                     extra={"index": index, "symbol": symbol_id, "kernel": kernel_id,
                                            "gap": gap}))
        logger.info(f"quotient-bound: {symbol_id} + {kernel_id}: norm {value:.6g}, sup {sup:.6g}")

    bound_verdict(report, "lower_bound", worst if math.isfinite(worst) else math.nan,
                  -th["quotient_slack"], at_most=False)
    if equality_gaps:
        bound_verdict(report, "equality_without_kernel", max(equality_gaps), th["toeplitz_gap"])
    return report


def run_boundary_multiplicativity(cfg: ExperimentConfig) -> ConvergenceReport:
    """||pi0b(f) pi0b(g) - pi0b(f*g) - pi0b(l(f,g))|| relative to ||pi0b(f)|| ||pi0b(g)||."""
    report = _new_report(cfg)
    line = boundary_line(cfg)
    if line.dim != 1:
        raise ConfigError("boundary-multiplicativity runs in dim 1")
    worst = 0.0
    for index, (f_id, g_id) in enumerate(cfg.pairs):
        f = resolve_symbol(f_id, 1)
        g = resolve_symbol(g_id, 1)
        zero = zero_kernel(1)
        try:
            a = assemble_pi0_boundary(f, zero, line)
            b = assemble_pi0_boundary(g, zero, line)
            symbol, kernel = star_prime(f, g)
            c = assemble_pi0_boundary(symbol, kernel, line)
        except SemiclassError as e:
            logger.warning(f"boundary-multiplicativity: pair {f_id}, {g_id} degraded: {e}")
            report.rows.append(ReportRow.degraded(cfg.experiment, None, str(e)))
            continue
        window = truncation_window(line, f.decay_radius + g.decay_radius)
        defect = _norm(compress(window, compose(a, b) - c), cfg)
        scale = _norm(a, cfg) * _norm(b, cfg)
        relative = defect / scale if scale else defect
        worst = max(worst, relative)
        report.rows.append(ReportRow(cfg.experiment, None, defect,
                                     extra={"index": index, "f": f_id, "g": g_id, "relative": relative}))
    bound_verdict(report, "multiplicativity", worst, cfg.thresholds["multiplicativity_relative"])
    return report


def run_toeplitz_equivalence(cfg: ExperimentConfig) -> ConvergenceReport:
    """Half-convolution against Toeplitz finite sections of the Cayley image."""
    f = resolve_symbol(cfg.f, 1)
    t = cfg.toeplitz
    th = cfg.thresholds
    report = _new_report(cfg)

    largest = max(t.sizes)
    result = equivalence_report(f, largest, t.line_extent, t.line_step, t.top)
    phi = cayley_symbol(f, SAMPLES_FACTOR * largest)
    norms = section_norms(phi, sorted(t.sizes))
    for size, value in zip(sorted(t.sizes), norms):
        report.rows.append(ReportRow(cfg.experiment, None, value, result.half_norm, extra={"size": size}))

    report.details["equivalence"] = result.to_dict()
    bound_verdict(report, "norm_gap", result.gap, th["toeplitz_gap"])
    bound_verdict(report, "cayley_vanishing", result.minus_one, th["cayley_vanishing"])
    monotone = all(b >= a - th["monotone_slack"] * max(norms) for a, b in zip(norms, norms[1:]))
    bound_verdict(report, "sections_nondecreasing", 0.0 if monotone else 1.0, 0.0)
    bound_verdict(report, "sections_below_sup", max(norms) - phi.sup(), 1e-10)
    return report


def run_commutator_profile(cfg: ExperimentConfig) -> ConvergenceReport:
    """Singular-value profile of [T_phi, T_psi] at growing section sizes."""
    t = cfg.toeplitz
    th = cfg.thresholds
    sizes = sorted(t.sizes)
    count = SAMPLES_FACTOR * max(sizes)
    phi = cayley_symbol(resolve_symbol(cfg.f, 1), count)
    psi = cayley_symbol(resolve_symbol(t.psi, 1), count)
    profile = commutator_compactness(phi, psi, sizes, int(th["commutator_index"]))

    report = _new_report(cfg)
    for i, size in enumerate(sizes):
        values = profile.singular_values[i]
        report.rows.append(ReportRow(cfg.experiment, None, profile.tail_ratio(i),
                                     extra={"size": size, "largest": values[0] if values else 0.0}))
    report.details["profile"] = profile.to_dict()
    bound_verdict(report, "tail_ratio", profile.tail_ratio(), th["commutator_tail"])
    return report


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    name: str
    runner: Callable[[ExperimentConfig], ConvergenceReport]
    description: str
    defaults: Dict[str, Any] = field(default_factory=dict, hash=False)


_INTERIOR_PAIR = {"grid": {"normal_extent": 8.0}}
_HALF_SPACE_PAIR = {"grid": {"normal_extent": 6.0, "resolution": 16}}
_GREEN_DEFECT = {"grid": {"normal_extent": 6.0, "resolution": 32},
                 "symbols": {"pairs": DECOMPOSITION_PAIRS}}

EXPERIMENTS: Dict[str, Experiment] = {
    entry.name: entry for entry in [
        Experiment("norm-limit-interior", run_norm_limit_interior,
                       "||rho_hbar(f)|| -> sup |f^| on the full space",
                       {"grid": {"normal_extent": 16.0}}),
        Experiment("norm-limit-boundary", run_norm_limit_boundary,
                       "||rho_hbar(f) + kappa_hbar(K)|| -> max(||pi0||, ||pi0 boundary||)",
                       {"grid": {"normal_extent": 8.0}, "symbols": {"f": "gauss:b=0.5"}}),
        Experiment("green-defect", run_green_defect,
                       "asymptotic multiplicativity up to the Green term, with the exact decomposition",
                       _GREEN_DEFECT),
        Experiment("vanishing-difference", run_vanishing_difference,
                       "the hbar-dependent corrections vanish as hbar -> 0",
                       _HALF_SPACE_PAIR),
        Experiment("interior-multiplicativity", run_interior_multiplicativity,
                       "||rho(f) rho(g) - rho(f*g)|| -> 0 on the full space",
                       _INTERIOR_PAIR),
        Experiment("boundary-compression", run_boundary_compression,
                       "compression to the boundary slab recovers the boundary symbol norm",
                       {"grid": {"normal_extent": 4.0}, "hbar": {"halvings": 8},
                        "symbols": {"f": "gauss:b=0.5"}}),
        Experiment("quotient-bound", run_quotient_bound,
                       "||pi0 boundary(f, K)|| >= sup |f^(0, .)|"),
        Experiment("boundary-multiplicativity", run_boundary_multiplicativity,
                       "pi0 boundary is multiplicative for the product *'",
                       {"boundary": {"line_extent": 32.0, "line_step": 0.125}}),
        Experiment("toeplitz-equivalence", run_toeplitz_equivalence,
                       "half-convolution norms match Toeplitz finite sections of the Cayley image",
                       {"symbols": {"f": "gauss:b=0.5"}}),
        Experiment("commutator-profile", run_commutator_profile,
                       "singular values of Toeplitz commutators decay",
                       {"symbols": {"f": "gauss:b=0.5"}}),
    ]
}


def list_experiments() -> List[Dict[str, str]]:
    return [{"name": s.name, "description": s.description} for s in EXPERIMENTS.values()]


def run_experiment(cfg: ExperimentConfig) -> ConvergenceReport:
    entry = EXPERIMENTS[cfg.experiment]
    logger.info(f"Running {entry.name}: {entry.description}")
    report = entry.runner(cfg)
    logger.info(report.summary())
    return report
