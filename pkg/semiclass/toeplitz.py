"""
Circle symbols, finite-section Toeplitz matrices and the half-convolution comparison.

The Cayley correspondence sends a fiber function f on the half-line to the circle symbol
phi(z) = f^(i (z - 1)/(z + 1)); half-convolution by f is then unitarily a Toeplitz
operator with symbol phi.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import svdvals, toeplitz
from scipy.sparse.linalg import LinearOperator, svds

from .config import RESOLUTION_FACTOR, SAMPLES_FACTOR, SVD_MAX_NODES, THRESHOLDS
from .errors import GridError
from .operators import DiscreteOperator, assemble_pi0_boundary, operator_norm
from .symbolics import HalfSpaceGrid, IndexGrid, Symbol, fiberwise_fourier, make_grid, zero_kernel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CircleSymbol:
    """Samples of phi at the roots of unity z_k = exp(2 pi i k / N)."""

    samples: np.ndarray
    source: str
    label: str = ""

    @property
    def count(self) -> int:
        return len(self.samples)

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.count) / self.count)

    def at_minus_one(self) -> complex:
        """Sample at z = -1 (present for even sample counts)."""
        if self.count % 2:
            raise GridError("z = -1 is a sample node only for even sample counts")
        return complex(self.samples[self.count // 2])

    def sup(self) -> float:
        return float(np.max(np.abs(self.samples), initial=0.0))


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Finite section T[j, k] = phi^(j - k)."""

    size: int
    entries: np.ndarray
    label: str = ""

    def as_operator(self) -> DiscreteOperator:
        return DiscreteOperator(IndexGrid(self.size), kernel=self.entries, label=self.label)

    def is_diagonal_constant(self) -> bool:
        first_col = self.entries[:, 0]
        first_row = self.entries[0, :]
        rebuilt = toeplitz(first_col, first_row)
        return bool(np.array_equal(rebuilt, self.entries))


def cayley_covariables(count: int) -> np.ndarray:
    """sigma_k = i (z_k - 1)/(z_k + 1) = -tan(theta_k / 2); the node z = -1 maps to nan."""
    theta = 2 * np.pi * np.arange(count) / count
    sigma = np.full(count, np.nan)
    regular = np.ones(count, dtype=bool)
    if count % 2 == 0:
        regular[count // 2] = False
    sigma[regular] = -np.tan(theta[regular] / 2)
    return sigma


def cayley_symbol(f: Symbol, count: int) -> CircleSymbol:
    """
    phi(z_k) = f^(0, i (z_k - 1)/(z_k + 1)) at ``count`` roots of unity.

    Covariables beyond the spectral radius of f (including z = -1) give exactly 0.
    """
    if f.dim != 1:
        raise GridError(f"Cayley symbols need a one-dimensional fiber, got dim {f.dim}")
    if count < 2:
        raise GridError(f"Need at least 2 samples, got {count}")

    sigma = cayley_covariables(count)
    samples = np.zeros(count, dtype=complex)
    if not f.is_zero:
        live = np.isfinite(sigma) & (np.abs(sigma) <= f.spectral_radius)
        points = sigma[live][:, None]
        if f.spectrum is not None:
            samples[live] = f.spectrum(np.zeros((1, 1)), points)
        else:
            samples[live] = fiberwise_fourier(f, points).samples[0]

    logger.debug(f"Cayley image of {f.label}: {count} samples, sup {np.max(np.abs(samples)):.6g}")
    return CircleSymbol(samples, source="cayley", label=f"cayley({f.label})")


def circle_symbol(function: Callable[[np.ndarray], np.ndarray], count: int, label: str = "") -> CircleSymbol:
    """A directly given symbol sampled at ``count`` roots of unity."""
    nodes = np.exp(2j * np.pi * np.arange(count) / count)
    values = np.broadcast_to(np.asarray(function(nodes), dtype=complex), nodes.shape).copy()
    return CircleSymbol(values, source="direct", label=label)


def fourier_coefficients(phi: CircleSymbol) -> np.ndarray:
    """phi^(m) = (1/N) sum_k phi(z_k) z_k^-m, indexed by m mod N."""
    return np.fft.fft(phi.samples) / phi.count


def toeplitz_assemble(phi: CircleSymbol, size: int) -> ToeplitzMatrix:
    if not 1 <= size <= phi.count:
        raise GridError(f"Section size {size} must lie in [1, {phi.count}]")
    coefficients = fourier_coefficients(phi)
    column = coefficients[:size]
    row = coefficients[(-np.arange(size)) % phi.count]
    return ToeplitzMatrix(size, toeplitz(column, row), label=f"T[{size}]({phi.label})")


def half_convolution_assemble(f: Symbol, grid: HalfSpaceGrid, *,
                              resolution: float = RESOLUTION_FACTOR) -> DiscreteOperator:
    """Half-line convolution xi -> int_0^inf f(s - w) xi(w) dw."""
    if f.dim != 1 or grid.dim != 1:
        raise GridError("Half-convolution is one-dimensional")
    op = assemble_pi0_boundary(f, zero_kernel(1), grid, resolution=resolution)
    return DiscreteOperator(op.grid, kernel=op.kernel, label=f"halfconv({f.label})")


def top_singular_values(op: DiscreteOperator, count: int) -> np.ndarray:
    """Largest singular values on the weighted space, descending."""
    count = min(count, op.size)
    weighted = op.weighted_matrix()
    if op.size <= 2 * SVD_MAX_NODES or count >= op.size - 1:
        return svdvals(weighted)[:count]
    linear = LinearOperator(weighted.shape, matvec=lambda x: weighted @ x,
                            rmatvec=lambda y: np.conj(weighted).T @ y, dtype=complex)
    values = svds(linear, k=count, return_singular_vectors=False, random_state=0)
    return np.sort(values)[::-1]


@dataclass
class EquivalenceReport:
    symbol: str
    size: int
    line_extent: float
    line_step: float
    half_norm: float
    toeplitz_norm: float
    gap: float
    symbol_sup: float
    minus_one: float
    half_singular_values: List[float] = field(default_factory=list)
    toeplitz_singular_values: List[float] = field(default_factory=list)
    singular_value_gaps: List[float] = field(default_factory=list)

    def passed(self, thresholds: Optional[Dict] = None) -> bool:
        limits = thresholds or THRESHOLDS
        return self.gap <= limits["toeplitz_gap"] and self.minus_one <= limits["cayley_vanishing"]

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def equivalence_report(f: Symbol, size: int = 512, line_extent: float = 64.0,
                       line_step: float = 1 / 32, top: int = 10) -> EquivalenceReport:
    """
    Compare the half-convolution by f on [0, line_extent] with the finite section of
    size ``size`` of the Toeplitz operator with the Cayley image of f.
    """
    points = int(round(line_extent / line_step)) + 1
    grid = make_grid(1, line_extent, points=points)
    half = half_convolution_assemble(f, grid)
    phi = cayley_symbol(f, SAMPLES_FACTOR * size)
    section = toeplitz_assemble(phi, size)

    half_values = top_singular_values(half, top)
    section_values = top_singular_values(section.as_operator(), top)
    half_norm = float(half_values[0]) if half_values.size else 0.0
    section_norm = float(section_values[0]) if section_values.size else 0.0
    gaps = [_relative_gap(a, b) for a, b in zip(half_values, section_values)]

    report = EquivalenceReport(
        symbol=f.label,
        size=size,
        line_extent=line_extent,
        line_step=line_step,
        half_norm=half_norm,
        toeplitz_norm=section_norm,
        gap=_relative_gap(half_norm, section_norm),
        symbol_sup=phi.sup(),
        minus_one=abs(phi.at_minus_one()),
        half_singular_values=[float(v) for v in half_values],
        toeplitz_singular_values=[float(v) for v in section_values],
        singular_value_gaps=gaps,
    )
    logger.info(f"Equivalence {f.label}: half {half_norm:.8f}, section {section_norm:.8f}, "
                f"gap {report.gap:.2e}")
    return report


def section_norms(phi: CircleSymbol, sizes: Sequence[int]) -> List[float]:
    """Finite-section norms for nested sections of one symbol."""
    return [operator_norm(toeplitz_assemble(phi, n).as_operator(), method="svd").value for n in sizes]


@dataclass
class CommutatorProfile:
    """Singular values of T_phi T_psi - T_psi T_phi per section size."""

    sizes: List[int]
    singular_values: List[List[float]]
    index: int

    def tail_ratio(self, position: int = -1) -> float:
        values = self.singular_values[position]
        if not values or values[0] == 0:
            return 0.0
        k = min(self.index, len(values)) - 1
        return values[k] / values[0]

    def leading(self, count: int = 5) -> List[List[float]]:
        return [values[:count] for values in self.singular_values]

    def to_dict(self) -> Dict:
        return {
            "sizes": list(self.sizes),
            "index": self.index,
            "tail_ratios": [self.tail_ratio(i) for i in range(len(self.sizes))],
            "leading": self.leading(),
        }


def commutator_compactness(phi: CircleSymbol, psi: CircleSymbol, sizes: Sequence[int],
                           index: int = THRESHOLDS["commutator_index"]) -> CommutatorProfile:
    """
    Singular-value profile of the commutator of two finite sections at increasing sizes.
    Compactness shows as stabilizing leading values and a decaying tail.
    """
    if phi.count != psi.count:
        raise GridError(f"Symbols sampled differently: {phi.count} vs {psi.count}")
    profile = []
    for size in sizes:
        a = toeplitz_assemble(phi, size).entries
        b = toeplitz_assemble(psi, size).entries
        commutator = a @ b - b @ a
        values = svdvals(commutator)
        profile.append([float(v) for v in values])
        logger.debug(f"Commutator at N_T={size}: s0={values[0]:.3e}")
    return CommutatorProfile(list(sizes), profile, index)


def cayley_vanishing_ok(phi: CircleSymbol, level: float = THRESHOLDS["cayley_vanishing"]) -> bool:
    return abs(phi.at_minus_one()) <= level and math.isfinite(phi.sup())
