"""
Grids, symbols, boundary kernels and the symbol-level calculus on the half-space.

Points carry a trailing coordinate axis of length ``dim`` with the normal coordinate
last. For ``dim == 1`` the trailing axis may be omitted. Boundary kernels take
tangential arguments with a trailing axis of length ``dim - 1`` (empty for ``dim == 1``).
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import (
    BOX_FACTOR,
    EVAL_BUDGET,
    FOURIER_CONVENTION,
    GAUSS_LEGENDRE_ORDER,
    PANEL_STEPS,
)
from .errors import GridError, ResolutionError
from .utils import atomic_write

logger = logging.getLogger(__name__)

SymbolFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
SpectrumFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
KernelFn = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

def _trapezoid_weights(points: int, spacing: float) -> np.ndarray:
    weights = np.full(points, spacing)
    weights[0] = weights[-1] = spacing / 2
    return weights


@dataclass(frozen=True)
class HalfSpaceGrid:
    """
    Uniform grid on [-L_t, L_t]^(dim-1) x [0, L_n] with trapezoid weights.

    With ``interior=True`` the normal range is [-L_n, L_n] (full space).
    Nodes are ordered tangential-major: index = i_t * points_normal + i_n.
    """

    dim: int
    normal_extent: float
    points_normal: int
    tangential_extent: Optional[float] = None
    points_tangential: Optional[int] = None
    interior: bool = False

    @property
    def normal_range(self) -> Tuple[float, float]:
        if self.interior:
            return -self.normal_extent, self.normal_extent
        return 0.0, self.normal_extent

    @cached_property
    def normal_spacing(self) -> float:
        lo, hi = self.normal_range
        return (hi - lo) / (self.points_normal - 1)

    @cached_property
    def tangential_spacing(self) -> Optional[float]:
        if self.dim == 1:
            return None
        return 2 * self.tangential_extent / (self.points_tangential - 1)

    @property
    def spacing(self) -> float:
        """Coarsest spacing over all axes."""
        if self.dim == 1:
            return self.normal_spacing
        return max(self.normal_spacing, self.tangential_spacing)

    @cached_property
    def normal_nodes(self) -> np.ndarray:
        lo, hi = self.normal_range
        return np.linspace(lo, hi, self.points_normal)

    @cached_property
    def tangential_nodes(self) -> np.ndarray:
        if self.dim == 1:
            return np.zeros(0)
        return np.linspace(-self.tangential_extent, self.tangential_extent, self.points_tangential)

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.dim == 1:
            return (self.points_normal,)
        return (self.points_tangential, self.points_normal)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.dim == 1:
            return self.normal_nodes[:, None]
        tangential, normal = np.meshgrid(self.tangential_nodes, self.normal_nodes, indexing='ij')
        return np.stack([tangential.ravel(), normal.ravel()], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        normal = _trapezoid_weights(self.points_normal, self.normal_spacing)
        if self.dim == 1:
            return normal
        tangential = _trapezoid_weights(self.points_tangential, self.tangential_spacing)
        return np.outer(tangential, normal).ravel()

    @property
    def measure(self) -> float:
        lo, hi = self.normal_range
        if self.dim == 1:
            return hi - lo
        return (hi - lo) * 2 * self.tangential_extent

    @property
    def normal_coordinates(self) -> np.ndarray:
        return self.nodes[:, -1]

    def describe(self) -> str:
        if self.dim == 1:
            lo, hi = self.normal_range
            return f"[{lo:g},{hi:g}] x {self.points_normal}"
        return (f"[-{self.tangential_extent:g},{self.tangential_extent:g}] x {self.points_tangential}"
                f" * [{self.normal_range[0]:g},{self.normal_range[1]:g}] x {self.points_normal}")


def _check_grid_args(dim: int, normal_extent: float, tangential_extent: Optional[float],
                     points: Union[int, Sequence[int]]) -> Tuple[int, Optional[int]]:
    if dim not in (1, 2):
        raise GridError(f"Grid dimension must be 1 or 2, got {dim}")
    if not normal_extent > 0:
        raise GridError(f"Normal extent must be positive, got {normal_extent}")

    if isinstance(points, (int, np.integer)):
        points_normal = int(points)
        points_tangential = int(points) if dim == 2 else None
    else:
        counts = [int(p) for p in points]
        if len(counts) != dim:
            raise GridError(f"Expected {dim} point counts, got {len(counts)}")
        points_normal = counts[0]
        points_tangential = counts[1] if dim == 2 else None

    if points_normal < 2 or (points_tangential is not None and points_tangential < 2):
        raise GridError(f"Every axis needs at least 2 points, got {points}")
    if dim == 2 and not (tangential_extent is not None and tangential_extent > 0):
        raise GridError(f"Tangential extent must be positive, got {tangential_extent}")
    return points_normal, points_tangential


def make_grid(dim: int, normal_extent: float, tangential_extent: Optional[float] = None,
              points: Union[int, Sequence[int]] = 2) -> HalfSpaceGrid:
    """
    Build a half-space grid.

    ``points`` is a single count or ``(normal, tangential)`` for ``dim == 2``.
    """
    points_normal, points_tangential = _check_grid_args(dim, normal_extent, tangential_extent, points)
    return HalfSpaceGrid(
        dim=dim,
        normal_extent=float(normal_extent),
        points_normal=points_normal,
        tangential_extent=float(tangential_extent) if dim == 2 else None,
        points_tangential=points_tangential,
    )


def make_interior_grid(dim: int, extent: float, points: Union[int, Sequence[int]] = 3,
                       tangential_extent: Optional[float] = None) -> HalfSpaceGrid:
    """Grid on the full space [-L, L]^dim (no boundary truncation)."""
    if dim == 2 and tangential_extent is None:
        tangential_extent = extent
    points_normal, points_tangential = _check_grid_args(dim, extent, tangential_extent, points)
    return HalfSpaceGrid(
        dim=dim,
        normal_extent=float(extent),
        points_normal=points_normal,
        tangential_extent=float(tangential_extent) if dim == 2 else None,
        points_tangential=points_tangential,
        interior=True,
    )


@dataclass(frozen=True)
class FiberGrid:
    """
    Periodic uniform fiber grid; full-line convolutions of rapidly decaying functions
    are realized as circulant convolutions on it.
    """

    dim: int
    points: int
    step: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"Fiber dimension must be 1 or 2, got {self.dim}")
        if self.points < 2 or not self.step > 0:
            raise GridError(f"Fiber grid needs points >= 2 and step > 0, got {self.points}, {self.step}")

    @property
    def period(self) -> float:
        return self.points * self.step

    @property
    def size(self) -> int:
        return self.points ** self.dim

    @cached_property
    def axis_index(self) -> np.ndarray:
        return np.arange(self.points) - self.points // 2

    @cached_property
    def axis_nodes(self) -> np.ndarray:
        return self.axis_index * self.step

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.dim == 1:
            return self.axis_nodes[:, None]
        a, b = np.meshgrid(self.axis_nodes, self.axis_nodes, indexing='ij')
        return np.stack([a.ravel(), b.ravel()], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.step ** self.dim)

    @cached_property
    def index(self) -> np.ndarray:
        if self.dim == 1:
            return self.axis_index[:, None]
        a, b = np.meshgrid(self.axis_index, self.axis_index, indexing='ij')
        return np.stack([a.ravel(), b.ravel()], axis=-1)

    def wrapped_differences(self) -> np.ndarray:
        """Periodic differences node_j - node_k as fiber nodes, shape (size, size, dim)."""
        diff = self.index[:, None, :] - self.index[None, :, :]
        half = self.points // 2
        wrapped = (diff + half) % self.points - half
        return wrapped * self.step

    @cached_property
    def covariables(self) -> np.ndarray:
        """Dual frequencies on which circulant blocks diagonalize."""
        axis = 2 * np.pi * np.fft.fftfreq(self.points, self.step)
        if self.dim == 1:
            return axis[:, None]
        a, b = np.meshgrid(axis, axis, indexing='ij')
        return np.stack([a.ravel(), b.ravel()], axis=-1)


@dataclass(frozen=True)
class IndexGrid:
    """Unit-weight index set for plain matrices and finite sections."""

    size: int
    dim: int = 1

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.size, dtype=float)[:, None]

    @cached_property
    def weights(self) -> np.ndarray:
        return np.ones(self.size)


Grid = Union[HalfSpaceGrid, FiberGrid, IndexGrid]


# ---------------------------------------------------------------------------
# Symbols and kernels
# ---------------------------------------------------------------------------

def as_points(values, dim: int) -> np.ndarray:
    """Coerce to an array of points with a trailing coordinate axis."""
    arr = np.asarray(values, dtype=float)
    if dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != dim:
        raise GridError(f"Expected points with {dim} coordinates, got shape {arr.shape}")
    return arr


def _tangential(values, dim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if dim == 1:
        if arr.ndim == 0 or arr.shape[-1] != 0:
            arr = arr[..., None][..., :0]
        return arr
    if arr.ndim == 0 or arr.shape[-1] != dim - 1:
        arr = arr[..., None]
    return arr


def join(tangential: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Concatenate tangential coordinates (..., d-1) with a normal coordinate (...)."""
    normal = np.asarray(normal, dtype=float)
    shape = np.broadcast_shapes(tangential.shape[:-1], normal.shape)
    t = np.broadcast_to(tangential, shape + tangential.shape[-1:])
    n = np.broadcast_to(normal, shape)[..., None]
    return np.concatenate([t, n], axis=-1)


@dataclass(frozen=True)
class Symbol:
    """
    A function f(x, v) on the tangent bundle of the half-space.

    ``base_eval`` is defined for every base point of R^n, which is the smooth
    extension the half-space calculus needs. ``spectrum`` is the closed-form fiberwise
    Fourier transform when the catalogue knows one.
    """

    dim: int
    base_eval: SymbolFn
    decay_radius: float
    label: str
    fiber_step: float
    spectral_radius: float
    base_radius: Optional[float] = None
    spectrum: Optional[SpectrumFn] = None
    is_zero: bool = False

    def __call__(self, x, v) -> np.ndarray:
        x = as_points(x, self.dim)
        v = as_points(v, self.dim)
        return np.asarray(self.base_eval(x, v), dtype=complex)


@dataclass(frozen=True)
class BoundaryKernel:
    """
    A kernel K(x', u', v_n, w_n) on T(boundary) x R+ x R+.

    ``reference_norm`` is the closed-form norm of the boundary operator with this
    kernel when the catalogue knows one.
    """

    dim: int
    eval: KernelFn
    decay_radius: float
    label: str
    step: float
    reference_norm: Optional[float] = None
    is_zero: bool = False

    def __call__(self, xp, up, vn, wn) -> np.ndarray:
        xp = _tangential(xp, self.dim)
        up = _tangential(up, self.dim)
        vn = np.asarray(vn, dtype=float)
        wn = np.asarray(wn, dtype=float)
        return np.asarray(self.eval(xp, up, vn, wn), dtype=complex)


def _zero_symbol_eval(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.zeros(np.broadcast_shapes(x.shape[:-1], v.shape[:-1]), dtype=complex)


def _zero_kernel_eval(xp, up, vn, wn) -> np.ndarray:
    shape = np.broadcast_shapes(xp.shape[:-1], up.shape[:-1], np.shape(vn), np.shape(wn))
    return np.zeros(shape, dtype=complex)


def zero_symbol(dim: int) -> Symbol:
    return Symbol(dim=dim, base_eval=_zero_symbol_eval, decay_radius=0.0, label="zero",
                  fiber_step=1.0, spectral_radius=0.0, base_radius=0.0,
                  spectrum=_zero_symbol_eval, is_zero=True)


def zero_kernel(dim: int) -> BoundaryKernel:
    return BoundaryKernel(dim=dim, eval=_zero_kernel_eval, decay_radius=0.0, label="zero",
                          step=1.0, reference_norm=0.0, is_zero=True)


@dataclass(frozen=True)
class BoundaryElement:
    """An element f + K of the boundary symbol algebra; unpacks as ``(f, K)``."""

    symbol: Symbol
    kernel: BoundaryKernel

    def __post_init__(self):
        if self.symbol.dim != self.kernel.dim:
            raise GridError(f"Symbol dim {self.symbol.dim} != kernel dim {self.kernel.dim}")

    @property
    def dim(self) -> int:
        return self.symbol.dim

    @property
    def label(self) -> str:
        return f"{self.symbol.label} + {self.kernel.label}"

    def __iter__(self) -> Iterator:
        yield self.symbol
        yield self.kernel


def as_element(item: Union[Symbol, BoundaryKernel, BoundaryElement]) -> BoundaryElement:
    if isinstance(item, BoundaryElement):
        return item
    if isinstance(item, Symbol):
        return BoundaryElement(item, zero_kernel(item.dim))
    if isinstance(item, BoundaryKernel):
        return BoundaryElement(zero_symbol(item.dim), item)
    raise TypeError(f"Cannot use {type(item).__name__} as a boundary element")


@dataclass(frozen=True)
class SampledSpectrum:
    """Samples of f^(x, sigma) on base points x (rows) and covariables sigma (columns)."""

    base_points: np.ndarray
    covariables: np.ndarray
    samples: np.ndarray
    convention: str = FOURIER_CONVENTION
    label: str = ""


# ---------------------------------------------------------------------------
# Quadrature rules
# ---------------------------------------------------------------------------

def trapezoid_rule(lo: float, hi: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform trapezoid rule on [lo, hi] with spacing at most ``step``."""
    if not step > 0:
        raise ResolutionError(f"Quadrature step must be positive, got {step}")
    count = max(int(math.ceil((hi - lo) / step - 1e-9)) + 1, 2)
    nodes = np.linspace(lo, hi, count)
    return nodes, _trapezoid_weights(count, (hi - lo) / (count - 1))


def box_rule(dim: int, radius: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor trapezoid rule on [-radius, radius]^dim; nodes (M, dim)."""
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    axis, weights = trapezoid_rule(-radius, radius, step)
    if dim == 1:
        return axis[:, None], weights
    a, b = np.meshgrid(axis, axis, indexing='ij')
    return np.stack([a.ravel(), b.ravel()], axis=-1), np.outer(weights, weights).ravel()


def half_line_rule(length: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre rule on [0, length].

    Half-line integrals stop at a hard endpoint where the integrand does not vanish,
    so panels of Gauss-Legendre nodes replace the trapezoid rule there.
    """
    length = max(length, step)
    panels = max(1, int(math.ceil(length / (PANEL_STEPS * step))))
    x, w = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_ORDER)
    edges = np.linspace(0.0, length, panels + 1)
    half = np.diff(edges) / 2
    mid = edges[:-1] + half
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _batches(count: int, width: int) -> Iterator[slice]:
    size = max(1, EVAL_BUDGET // max(width, 1))
    for start in range(0, count, size):
        yield slice(start, min(start + size, count))


# ---------------------------------------------------------------------------
# Fiberwise Fourier transform
# ---------------------------------------------------------------------------

def covariable_grid(dim: int, extent: float, points: int) -> np.ndarray:
    """Symmetric covariable nodes on [-extent, extent]^dim; odd counts include sigma = 0."""
    axis = np.linspace(-extent, extent, points)
    if dim == 1:
        return axis[:, None]
    a, b = np.meshgrid(axis, axis, indexing='ij')
    return np.stack([a.ravel(), b.ravel()], axis=-1)


def fiberwise_fourier(f: Symbol, covariables, base_points=None, *,
                      step: Optional[float] = None, radius: Optional[float] = None,
                      fiber: Optional[FiberGrid] = None) -> SampledSpectrum:
    """
    Quadrature Fourier transform in the fiber variable at every (base point, covariable).

    The default quadrature box is ``BOX_FACTOR * decay_radius`` with the symbol's fiber
    step, refined so that ``step * max|sigma| <= pi``. An explicit ``step`` above that
    Nyquist bound raises ``ResolutionError``. With ``fiber`` the periodic fiber nodes
    are used instead, which makes the result match circulant blocks on that fiber.
    """
    dim = f.dim
    sigma = as_points(covariables, dim).reshape(-1, dim)
    base = np.zeros((1, dim)) if base_points is None else as_points(base_points, dim).reshape(-1, dim)
    samples = np.zeros((len(base), len(sigma)), dtype=complex)

    if f.is_zero:
        return SampledSpectrum(base, sigma, samples, FOURIER_CONVENTION, f.label)

    if fiber is not None:
        if fiber.dim != dim:
            raise GridError(f"Fiber grid dim {fiber.dim} does not match symbol dim {dim}")
        axis = fiber.axis_nodes
        axis_weights = np.full(fiber.points, fiber.step)
    else:
        sigma_max = float(np.max(np.abs(sigma))) if sigma.size else 0.0
        nyquist = math.pi / sigma_max if sigma_max > 0 else math.inf
        if step is None:
            step = min(f.fiber_step, nyquist)
        elif step > nyquist * (1 + 1e-12):
            raise ResolutionError(
                f"Fiber step {step:g} cannot resolve |sigma| = {sigma_max:g}; "
                f"need step <= {nyquist:g}",
                required_spacing=nyquist,
            )
        if radius is None:
            radius = BOX_FACTOR * f.decay_radius
        elif radius < f.decay_radius:
            logger.warning(f"Quadrature radius {radius:g} is below the decay radius "
                           f"{f.decay_radius:g} of {f.label}")
        axis, axis_weights = trapezoid_rule(-radius, radius, step)

    m = len(axis)
    if dim == 1:
        v = axis[:, None]
        weights = axis_weights
    else:
        a, b = np.meshgrid(axis, axis, indexing='ij')
        v = np.stack([a.ravel(), b.ravel()], axis=-1)
        weights = np.outer(axis_weights, axis_weights).ravel()

    values = f(base[:, None, :], v[None, :, :]) * weights[None, :]
    for sl in _batches(len(sigma), m ** dim if dim == 1 else m * len(base) * m):
        s = sigma[sl]
        if dim == 1:
            phase = np.exp(-1j * np.outer(axis, s[:, 0]))
            samples[:, sl] = values @ phase
        else:
            grid_values = values.reshape(len(base), m, m)
            first = np.exp(-1j * np.outer(axis, s[:, 0]))
            second = np.exp(-1j * np.outer(axis, s[:, 1]))
            inner = np.einsum('ikl,lj->ikj', grid_values, second)
            samples[:, sl] = np.einsum('ikj,kj->ij', inner, first)

    return SampledSpectrum(base, sigma, samples, FOURIER_CONVENTION, f.label)


def symbol_sup_norm(spectrum: SampledSpectrum) -> float:
    """Largest modulus among the samples."""
    if spectrum.samples.size == 0:
        return 0.0
    return float(np.max(np.abs(spectrum.samples)))


def sup_norm_reference(f: Symbol, base_points=None, *, sigma_points: Optional[int] = None) -> float:
    """sup |f^(x, sigma)| over the given base points and a covariable box of the spectral radius."""
    if f.is_zero:
        return 0.0
    if sigma_points is None:
        sigma_points = 401 if f.dim == 1 else 61
    extent = max(f.spectral_radius, 1e-3)
    sigma = covariable_grid(f.dim, extent, sigma_points)
    return symbol_sup_norm(fiberwise_fourier(f, sigma, base_points))


def export_csv(spectrum: SampledSpectrum, path: Union[str, Path]) -> Path:
    """Write node coordinates and re/im columns, one row per (base point, covariable)."""
    dim = spectrum.base_points.shape[-1]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    header = [f"x{k + 1}" for k in range(dim)] + [f"sigma{k + 1}" for k in range(dim)] + ["re", "im"]
    writer.writerow(header)
    for i, x in enumerate(spectrum.base_points):
        for j, s in enumerate(spectrum.covariables):
            value = spectrum.samples[i, j]
            writer.writerow([repr(float(c)) for c in x] + [repr(float(c)) for c in s]
                            + [repr(float(value.real)), repr(float(value.imag))])
    return atomic_write(path, buffer.getvalue())


# ---------------------------------------------------------------------------
# Products of symbols
# ---------------------------------------------------------------------------

def _flatten(*arrays: np.ndarray, trailing: Sequence[int]) -> Tuple[Tuple[int, ...], List[np.ndarray]]:
    """Broadcast arrays whose last ``trailing[k]`` axes are coordinates and flatten the rest."""
    leading = [a.shape[:a.ndim - t] if t else a.shape for a, t in zip(arrays, trailing)]
    shape = np.broadcast_shapes(*leading)
    count = int(np.prod(shape, dtype=int))
    flat = []
    for a, t in zip(arrays, trailing):
        tail = a.shape[a.ndim - t:] if t else ()
        # explicit count: -1 is ambiguous when a tail axis has length 0
        flat.append(np.broadcast_to(a, shape + tail).reshape((count,) + tail))
    return shape, flat


def _check_dims(f, g):
    if f.dim != g.dim:
        raise GridError(f"Dimension mismatch: {f.label} has dim {f.dim}, {g.label} has dim {g.dim}")


def _check_hbar(hbar: float, allow_zero: bool = False):
    lower_ok = hbar >= 0 if allow_zero else hbar > 0
    if not (lower_ok and hbar <= 1):
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        raise GridError(f"hbar must lie in {interval}, got {hbar}")


def _min_radius(*radii: Optional[float]) -> Optional[float]:
    known = [r for r in radii if r is not None]
    return min(known) if known else None


def _convolution(f: Symbol, g: Symbol, hbar: float) -> Symbol:
    _check_dims(f, g)
    if f.is_zero or g.is_zero:
        return zero_symbol(f.dim)

    step = min(f.fiber_step, g.fiber_step)
    nodes, weights = box_rule(f.dim, BOX_FACTOR * f.decay_radius, step)

    def evaluate(x: np.ndarray, w: np.ndarray) -> np.ndarray:
        shape, (xf, wf) = _flatten(x, w, trailing=(1, 1))
        out = np.empty(len(xf), dtype=complex)
        for sl in _batches(len(xf), len(nodes)):
            xs = xf[sl][:, None, :]
            ws = wf[sl][:, None, :]
            v = nodes[None, :, :]
            out[sl] = (f(xs, v) * g(xs - hbar * v, ws - v)) @ weights
        return out.reshape(shape)

    spectrum = None
    if hbar == 0 and f.spectrum is not None and g.spectrum is not None:
        def spectrum(x, sigma, _f=f.spectrum, _g=g.spectrum):
            return _f(x, sigma) * _g(x, sigma)

    label = f"({f.label})*({g.label})" if hbar == 0 else f"({f.label})*[{hbar:g}]({g.label})"
    return Symbol(
        dim=f.dim,
        base_eval=evaluate,
        decay_radius=f.decay_radius + g.decay_radius,
        label=label,
        fiber_step=step,
        spectral_radius=min(f.spectral_radius, g.spectral_radius),
        base_radius=_min_radius(f.base_radius, g.base_radius),
        spectrum=spectrum,
    )


def convolve_symbols(f: Symbol, g: Symbol) -> Symbol:
    """(f*g)(x, w) = int f(x, v) g(x, w - v) dv, evaluated by quadrature on demand."""
    return _convolution(f, g, 0.0)


def convolve_symbols_hbar(f: Symbol, g: Symbol, hbar: float) -> Symbol:
    """(f *_hbar g)(x, w) = int f(x, v) g(x - hbar v, w - v) dv."""
    _check_hbar(hbar)
    return _convolution(f, g, float(hbar))


def _leftover(f: Symbol, g: Symbol, hbar: float) -> BoundaryKernel:
    _check_dims(f, g)
    dim = f.dim
    if f.is_zero or g.is_zero:
        return zero_kernel(dim)

    step = min(f.fiber_step, g.fiber_step)
    reach = BOX_FACTOR * f.decay_radius
    t, t_weights = half_line_rule(reach, step)
    s, s_weights = box_rule(dim - 1, reach, step)
    # product rule over (tangential v', normal offset t), v_n = x_n + t
    sv = np.repeat(s, len(t), axis=0)
    tv = np.tile(t, len(s))
    wq = np.repeat(s_weights, len(t)) * np.tile(t_weights, len(s))

    def evaluate(xp, up, vn, wn) -> np.ndarray:
        shape, (xpf, upf, vnf, wnf) = _flatten(xp, up, vn, wn, trailing=(1, 1, 0, 0))
        out = np.empty(len(vnf), dtype=complex)
        for sl in _batches(len(vnf), len(wq)):
            xs = xpf[sl][:, None, :]
            us = upf[sl][:, None, :]
            xn = vnf[sl][:, None]
            yn = wnf[sl][:, None]
            fx = join(xs, hbar * xn)
            fv = join(np.broadcast_to(sv, (1,) + sv.shape), xn + tv[None, :])
            gx = join(xs - hbar * sv[None], -hbar * tv[None, :])
            gv = join(us - sv[None], -yn - tv[None, :])
            out[sl] = -((f(fx, fv) * g(gx, gv)) @ wq)
        return out.reshape(shape)

    label = f"l({f.label},{g.label})" if hbar == 0 else f"l[{hbar:g}]({f.label},{g.label})"
    return BoundaryKernel(dim=dim, eval=evaluate, decay_radius=f.decay_radius + g.decay_radius,
                          label=label, step=step)


def leftover_l(f: Symbol, g: Symbol) -> BoundaryKernel:
    """
    The asymptotic Green term at hbar = 0:
    l(f,g)(x', y', x_n, y_n) = -int_{v_n >= x_n} f(x',0, v', v_n) g(x',0, y'-v', x_n-y_n-v_n) dv.
    """
    return _leftover(f, g, 0.0)


def leftover_l_hbar(f: Symbol, g: Symbol, hbar: float) -> BoundaryKernel:
    """
    The asymptotic Green term at hbar > 0:
    l_hbar(f,g)(x', y', x_n, y_n) =
        -int_{v_n >= x_n} f(x', hbar x_n, v) g(x' - hbar v', hbar (x_n - v_n), y' - v', x_n - y_n - v_n) dv.
    """
    _check_hbar(hbar)
    return _leftover(f, g, float(hbar))


# ---------------------------------------------------------------------------
# Boundary algebra: kernel sums, half-convolutions, the product *'
# ---------------------------------------------------------------------------

def kernel_sum(kernels: Sequence[BoundaryKernel]) -> BoundaryKernel:
    """Pointwise sum of boundary kernels; zero kernels drop out."""
    if not kernels:
        raise GridError("kernel_sum needs at least one kernel")
    dim = kernels[0].dim
    live = [k for k in kernels if not k.is_zero]
    for k in kernels:
        if k.dim != dim:
            raise GridError(f"Dimension mismatch in kernel sum: {k.label}")
    if not live:
        return zero_kernel(dim)
    if len(live) == 1:
        return live[0]

    def evaluate(xp, up, vn, wn):
        total = live[0].eval(xp, up, vn, wn)
        for k in live[1:]:
            total = total + k.eval(xp, up, vn, wn)
        return total

    return BoundaryKernel(dim=dim, eval=evaluate,
                          decay_radius=max(k.decay_radius for k in live),
                          label=" + ".join(k.label for k in live),
                          step=min(k.step for k in live))


def _compose_boundary(first: KernelFn, second: KernelFn, dim: int, depth: float,
                      tangential_radius: float, step: float, radius: float, label: str) -> BoundaryKernel:
    """(A o B)(x', u', v_n, w_n) = int_{z >= 0} int A(x', u' - t', v_n, z) B(x', t', z, w_n) dt' dz."""
    z, z_weights = half_line_rule(depth, step)
    t, t_weights = box_rule(dim - 1, tangential_radius, step)
    tq = np.repeat(t, len(z), axis=0)
    zq = np.tile(z, len(t))
    wq = np.repeat(t_weights, len(z)) * np.tile(z_weights, len(t))

    def evaluate(xp, up, vn, wn) -> np.ndarray:
        shape, (xpf, upf, vnf, wnf) = _flatten(xp, up, vn, wn, trailing=(1, 1, 0, 0))
        out = np.empty(len(vnf), dtype=complex)
        for sl in _batches(len(vnf), len(wq)):
            xs = xpf[sl][:, None, :]
            us = upf[sl][:, None, :]
            a = first(xs, us - tq[None], vnf[sl][:, None], zq[None, :])
            b = second(xs, np.broadcast_to(tq, (1,) + tq.shape), zq[None, :], wnf[sl][:, None])
            out[sl] = (a * b) @ wq
        return out.reshape(shape)

    return BoundaryKernel(dim=dim, eval=evaluate, decay_radius=radius, label=label, step=step)


def _symbol_on_left(f: Symbol) -> KernelFn:
    def evaluate(xp, u, vn, z):
        return f(join(xp, 0.0), join(u, vn - z))
    return evaluate


def _symbol_on_right(g: Symbol) -> KernelFn:
    def evaluate(xp, t, z, wn):
        return g(join(xp, 0.0), join(t, z - wn))
    return evaluate


def symbol_kernel_product(f: Symbol, kernel: BoundaryKernel) -> BoundaryKernel:
    """Kernel of pi0_boundary(f) pi0_boundary(K): half-convolution of f against K."""
    _check_dims(f, kernel)
    if f.is_zero or kernel.is_zero:
        return zero_kernel(f.dim)
    reach = BOX_FACTOR * kernel.decay_radius
    return _compose_boundary(_symbol_on_left(f), kernel.eval, f.dim, reach, reach,
                             min(f.fiber_step, kernel.step),
                             f.decay_radius + kernel.decay_radius,
                             f"({f.label})o({kernel.label})")


def kernel_symbol_product(kernel: BoundaryKernel, g: Symbol) -> BoundaryKernel:
    """Kernel of pi0_boundary(K) pi0_boundary(g)."""
    _check_dims(kernel, g)
    if g.is_zero or kernel.is_zero:
        return zero_kernel(g.dim)
    return _compose_boundary(kernel.eval, _symbol_on_right(g), g.dim,
                             BOX_FACTOR * kernel.decay_radius, BOX_FACTOR * g.decay_radius,
                             min(g.fiber_step, kernel.step),
                             g.decay_radius + kernel.decay_radius,
                             f"({kernel.label})o({g.label})")


def kernel_product(first: BoundaryKernel, second: BoundaryKernel) -> BoundaryKernel:
    """Groupoid convolution of two boundary kernels."""
    _check_dims(first, second)
    if first.is_zero or second.is_zero:
        return zero_kernel(first.dim)
    return _compose_boundary(first.eval, second.eval, first.dim,
                             BOX_FACTOR * first.decay_radius, BOX_FACTOR * second.decay_radius,
                             min(first.step, second.step),
                             max(first.decay_radius, second.decay_radius),
                             f"({first.label})o({second.label})")


def star_prime(a: Union[Symbol, BoundaryKernel, BoundaryElement],
               b: Union[Symbol, BoundaryKernel, BoundaryElement]) -> BoundaryElement:
    """
    The product of the boundary symbol algebra:
    (f + K) *' (g + L) = f*g + [l(f,g) + f o L + K o g + K o L].

    For pure symbols this is the pair (f*g, l(f,g)).
    """
    left, right = as_element(a), as_element(b)
    _check_dims(left, right)
    f, k = left
    g, m = right
    symbol = convolve_symbols(f, g)
    parts = [
        leftover_l(f, g),
        symbol_kernel_product(f, m),
        kernel_symbol_product(k, g),
        kernel_product(k, m),
    ]
    return BoundaryElement(symbol, kernel_sum(parts))


# ---------------------------------------------------------------------------
# Involution and conjugation
# ---------------------------------------------------------------------------

def symbol_involution(f: Symbol) -> Symbol:
    """f*(x, v) = conj f(x, -v)."""
    if f.is_zero:
        return f

    def evaluate(x, v):
        return np.conj(f(x, -v))

    spectrum = None
    if f.spectrum is not None:
        def spectrum(x, sigma, _s=f.spectrum):
            return np.conj(_s(x, sigma))

    return Symbol(dim=f.dim, base_eval=evaluate, decay_radius=f.decay_radius,
                  label=f"({f.label})^*", fiber_step=f.fiber_step,
                  spectral_radius=f.spectral_radius, base_radius=f.base_radius, spectrum=spectrum)


def kernel_involution(kernel: BoundaryKernel) -> BoundaryKernel:
    """K*(x', u', v_n, w_n) = conj K(x', -u', w_n, v_n)."""
    if kernel.is_zero:
        return kernel

    def evaluate(xp, up, vn, wn):
        return np.conj(kernel.eval(xp, -up, wn, vn))

    return BoundaryKernel(dim=kernel.dim, eval=evaluate, decay_radius=kernel.decay_radius,
                          label=f"({kernel.label})^*", step=kernel.step,
                          reference_norm=kernel.reference_norm)


def element_involution(element: BoundaryElement) -> BoundaryElement:
    f, k = as_element(element)
    return BoundaryElement(symbol_involution(f), kernel_involution(k))


def symbol_conjugate(f: Symbol) -> Symbol:
    """Pointwise complex conjugate of a symbol."""
    if f.is_zero:
        return f

    def evaluate(x, v):
        return np.conj(f(x, v))

    spectrum = None
    if f.spectrum is not None:
        def spectrum(x, sigma, _s=f.spectrum):
            return np.conj(_s(x, -sigma))

    return Symbol(dim=f.dim, base_eval=evaluate, decay_radius=f.decay_radius,
                  label=f"conj({f.label})", fiber_step=f.fiber_step,
                  spectral_radius=f.spectral_radius, base_radius=f.base_radius, spectrum=spectrum)
