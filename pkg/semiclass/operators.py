"""
Discretized representations on the half-space and their operator norms.

A ``DiscreteOperator`` acts on grid samples by ``A xi = K (w * xi)`` where ``K`` is the
kernel matrix and ``w`` the grid's quadrature weights; the discrete L2 inner product is
weighted by ``w``. Multiplication operators (projections, identity) keep a multiplier
vector instead of a kernel so that their algebra is exact.
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.linalg import svdvals
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .config import (
    BOX_FACTOR,
    DEFAULT_BETA,
    NORM_KRYLOV_DIM,
    NORM_MAX_ITER,
    NORM_SEED,
    NORM_TOL,
    RESOLUTION_FACTOR,
    ROW_BLOCK,
    SVD_MAX_NODES,
)
from .errors import ConvergenceError, GridError, ReportError, ResolutionError
from .symbolics import (
    BoundaryElement,
    BoundaryKernel,
    FiberGrid,
    Grid,
    HalfSpaceGrid,
    Symbol,
    as_element,
    box_rule,
    covariable_grid,
    fiberwise_fourier,
    join,
    make_grid,
    make_interior_grid,
    symbol_sup_norm,
)
from .utils import atomic_write

logger = logging.getLogger(__name__)

OPERATOR_MAGIC = b"SCLSOP01"
_HEADER = struct.Struct("<8sQQ")


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Kernel (or multiplier) on a grid, with a provenance label."""

    grid: Grid
    kernel: Optional[np.ndarray] = None
    multiplier: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        if (self.kernel is None) == (self.multiplier is None):
            raise GridError("Exactly one of kernel and multiplier must be given")
        n = len(self.grid.weights)
        if self.kernel is not None and self.kernel.shape != (n, n):
            raise GridError(f"Kernel shape {self.kernel.shape} does not match {n} grid nodes")
        if self.multiplier is not None and self.multiplier.shape != (n,):
            raise GridError(f"Multiplier shape {self.multiplier.shape} does not match {n} grid nodes")

    @property
    def size(self) -> int:
        return len(self.grid.weights)

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def is_multiplier(self) -> bool:
        return self.multiplier is not None

    def matrix(self) -> np.ndarray:
        """Dense kernel; a multiplier m becomes diag(m / w)."""
        if self.kernel is not None:
            return self.kernel
        return np.diag(self.multiplier / self.weights).astype(complex)

    def apply(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi)
        if self.multiplier is not None:
            return self.multiplier * xi
        return self.kernel @ (self.weights * xi)

    def apply_rowwise(self, xi: np.ndarray) -> np.ndarray:
        """Row-by-row quadrature sum_j K[i, j] w_j xi_j."""
        xi = np.asarray(xi, dtype=complex)
        if self.multiplier is not None:
            return self.multiplier * xi
        weighted = self.weights * xi
        out = np.empty(self.size, dtype=complex)
        for start in range(0, self.size, ROW_BLOCK):
            block = slice(start, start + ROW_BLOCK)
            out[block] = np.sum(self.kernel[block] * weighted[None, :], axis=1)
        return out

    def weighted_matrix(self) -> np.ndarray:
        """W^1/2 K W^1/2: its spectral norm is the operator norm on weighted L2."""
        if self.multiplier is not None:
            return np.diag(self.multiplier).astype(complex)
        root = np.sqrt(self.weights)
        return root[:, None] * self.kernel * root[None, :]

    def _combine(self, other: "DiscreteOperator", sign: float) -> "DiscreteOperator":
        _check_same_grid(self, other)
        label = f"{self.label} {'+' if sign > 0 else '-'} {other.label}"
        if self.is_multiplier and other.is_multiplier:
            return DiscreteOperator(self.grid, multiplier=self.multiplier + sign * other.multiplier,
                                    label=label)
        return DiscreteOperator(self.grid, kernel=self.matrix() + sign * other.matrix(), label=label)

    def __add__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        return self._combine(other, 1.0)

    def __sub__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        return self._combine(other, -1.0)

    def scaled(self, factor: complex) -> "DiscreteOperator":
        if self.is_multiplier:
            return DiscreteOperator(self.grid, multiplier=factor * self.multiplier, label=self.label)
        return DiscreteOperator(self.grid, kernel=factor * self.kernel, label=self.label)


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """
    A family of operators indexed by frozen parameters (base points, tangential
    frequencies). Its norm is the supremum of the member norms.
    """

    members: Tuple[DiscreteOperator, ...]
    parameters: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not self.members:
            raise GridError("Operator family needs at least one member")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def _zip(self, other: "OperatorFamily", op: Callable, label: str) -> "OperatorFamily":
        if len(self) != len(other):
            raise GridError(f"Family sizes differ: {len(self)} vs {len(other)}")
        return OperatorFamily(tuple(op(a, b) for a, b in zip(self, other)), self.parameters, label)

    def __add__(self, other: "OperatorFamily") -> "OperatorFamily":
        return self._zip(other, lambda a, b: a + b, f"{self.label} + {other.label}")

    def __sub__(self, other: "OperatorFamily") -> "OperatorFamily":
        return self._zip(other, lambda a, b: a - b, f"{self.label} - {other.label}")


Operator = Union[DiscreteOperator, OperatorFamily]


@dataclass(frozen=True)
class NormEstimate:
    value: float
    method: str  # "svd" or "lanczos"
    iterations: int = 0
    residual: float = 0.0
    members: int = field(default=1, compare=False)


# ---------------------------------------------------------------------------
# Resolution and grids
# ---------------------------------------------------------------------------

def _check_hbar(hbar: float):
    if not 0 < hbar <= 1:
        raise GridError(f"hbar must lie in (0, 1], got {hbar}")


def check_resolution(grid: HalfSpaceGrid, hbar: float, radius: float,
                     resolution: float = RESOLUTION_FACTOR, what: str = "kernel"):
    """Require spacing <= hbar * radius / resolution."""
    if radius <= 0:
        return
    required = hbar * radius / resolution
    if grid.spacing > required * (1 + 1e-12):
        finest = grid.spacing * resolution / radius
        raise ResolutionError(
            f"Grid spacing {grid.spacing:g} does not resolve the {what} at hbar={hbar:g} "
            f"(need <= {required:g}); finest admissible hbar is {finest:g}",
            required_spacing=required,
            finest_hbar=finest,
        )


def grid_for_hbar(dim: int, hbar: float, radius: float, normal_extent: float, *,
                  tangential_extent: Optional[float] = None,
                  resolution: float = RESOLUTION_FACTOR, max_points: int = 3000,
                  interior: bool = False) -> HalfSpaceGrid:
    """
    Coarsest grid resolving a kernel of width hbar * radius.

    Raises ``ResolutionError`` carrying the finest admissible hbar when the node
    count would exceed ``max_points``.
    """
    _check_hbar(hbar)
    spacing = hbar * radius / resolution
    normal_length = 2 * normal_extent if interior else normal_extent
    points_normal = int(math.ceil(normal_length / spacing - 1e-9)) + 1
    points = [points_normal]
    total = points_normal
    if dim == 2:
        points_tangential = int(math.ceil(2 * tangential_extent / spacing - 1e-9)) + 1
        points.append(points_tangential)
        total *= points_tangential

    if total > max_points:
        per_axis = max_points ** (1 / dim) - 1
        longest = max(normal_length, 2 * tangential_extent if dim == 2 else 0.0)
        finest = resolution * longest / (per_axis * radius)
        raise ResolutionError(
            f"hbar={hbar:g} needs {total} grid points (limit {max_points}); "
            f"finest admissible hbar is {finest:g}",
            required_spacing=spacing,
            finest_hbar=finest,
            required_points=total,
        )

    if interior:
        return make_interior_grid(dim, normal_extent, points, tangential_extent)
    return make_grid(dim, normal_extent, tangential_extent, points)


def _check_same_grid(a: DiscreteOperator, b: DiscreteOperator):
    if a.grid is not b.grid and a.grid != b.grid:
        raise GridError(f"Operators live on different grids: {a.label!r}, {b.label!r}")


def _kernel_rows(grid: Grid, fill: Callable[[slice], np.ndarray]) -> np.ndarray:
    n = len(grid.weights)
    kernel = np.empty((n, n), dtype=complex)
    for start in range(0, n, ROW_BLOCK):
        block = slice(start, min(start + ROW_BLOCK, n))
        kernel[block] = fill(block)
    return kernel


# ---------------------------------------------------------------------------
# Representations
# ---------------------------------------------------------------------------

def assemble_rho(f: Symbol, hbar: float, grid: HalfSpaceGrid, *,
                 resolution: float = RESOLUTION_FACTOR) -> DiscreteOperator:
    """
    The truncated hbar-scaled operator: kernel hbar^-n f(x, (x - w)/hbar) on grid nodes.

    Integrating only over half-space nodes realizes the truncation.
    """
    _check_hbar(hbar)
    label = f"rho[{hbar:g}]({f.label})"
    if f.is_zero:
        return DiscreteOperator(grid, kernel=np.zeros((grid.size, grid.size), dtype=complex), label=label)
    if f.dim != grid.dim:
        raise GridError(f"Symbol dim {f.dim} does not match grid dim {grid.dim}")
    check_resolution(grid, hbar, f.decay_radius, resolution, f"symbol {f.label}")

    nodes = grid.nodes
    scale = hbar ** (-grid.dim)

    def fill(block):
        x = nodes[block]
        v = (x[:, None, :] - nodes[None, :, :]) / hbar
        # entries beyond the decay radius are below truncation level
        rows, cols = np.nonzero(np.max(np.abs(v), axis=-1) <= f.decay_radius)
        values = np.zeros(v.shape[:2], dtype=complex)
        if rows.size:
            values[rows, cols] = scale * f(x[rows], v[rows, cols])
        return values

    logger.debug(f"Assembling {label} on {grid.size} nodes")
    return DiscreteOperator(grid, kernel=_kernel_rows(grid, fill), label=label)


def assemble_kappa(kernel: BoundaryKernel, hbar: float, grid: HalfSpaceGrid, *,
                   resolution: float = RESOLUTION_FACTOR) -> DiscreteOperator:
    """Asymptotic Green operator: hbar^-n K(x', (x' - w')/hbar, x_n/hbar, w_n/hbar)."""
    _check_hbar(hbar)
    label = f"kappa[{hbar:g}]({kernel.label})"
    if kernel.is_zero:
        return DiscreteOperator(grid, kernel=np.zeros((grid.size, grid.size), dtype=complex), label=label)
    if kernel.dim != grid.dim:
        raise GridError(f"Kernel dim {kernel.dim} does not match grid dim {grid.dim}")
    if grid.interior:
        raise GridError("Boundary kernels need a half-space grid")
    check_resolution(grid, hbar, kernel.decay_radius, resolution, f"kernel {kernel.label}")

    nodes = grid.nodes
    tangential = nodes[:, :-1]
    normal = nodes[:, -1]
    scale = hbar ** (-grid.dim)

    def fill(block):
        xp = tangential[block]
        up = (xp[:, None, :] - tangential[None, :, :]) / hbar
        vn = np.broadcast_to(normal[block][:, None] / hbar, up.shape[:2])
        wn = np.broadcast_to(normal[None, :] / hbar, up.shape[:2])
        reach = np.maximum(vn, wn)
        if up.shape[-1]:
            reach = np.maximum(reach, np.max(np.abs(up), axis=-1))
        rows, cols = np.nonzero(reach <= kernel.decay_radius)
        values = np.zeros(up.shape[:2], dtype=complex)
        if rows.size:
            values[rows, cols] = scale * kernel(xp[rows], up[rows, cols], vn[rows, cols], wn[rows, cols])
        return values

    logger.debug(f"Assembling {label} on {grid.size} nodes")
    return DiscreteOperator(grid, kernel=_kernel_rows(grid, fill), label=label)


def assemble_element(element: Union[Symbol, BoundaryKernel, BoundaryElement], hbar: float,
                     grid: HalfSpaceGrid, *, resolution: float = RESOLUTION_FACTOR) -> DiscreteOperator:
    """rho_hbar(f) + kappa_hbar(K)."""
    f, k = as_element(element)
    rho = assemble_rho(f, hbar, grid, resolution=resolution)
    if k.is_zero:
        return rho
    return rho + assemble_kappa(k, hbar, grid, resolution=resolution)


def assemble_pi0(f: Symbol, grid: HalfSpaceGrid, fiber: FiberGrid) -> OperatorFamily:
    """
    The hbar = 0 representation: one full-line convolution by f(x, .) per base node x,
    realized as a circulant block on the periodic fiber grid.
    """
    if fiber.dim != f.dim:
        raise GridError(f"Fiber dim {fiber.dim} does not match symbol dim {f.dim}")
    base = grid.nodes
    if not f.is_zero and fiber.step > f.decay_radius / RESOLUTION_FACTOR:
        raise ResolutionError(
            f"Fiber step {fiber.step:g} does not resolve {f.label} "
            f"(need <= {f.decay_radius / RESOLUTION_FACTOR:g})",
            required_spacing=f.decay_radius / RESOLUTION_FACTOR,
        )
    if not f.is_zero and fiber.period < 2 * f.decay_radius:
        logger.warning(f"Fiber period {fiber.period:g} is shorter than twice the decay "
                       f"radius of {f.label}; blocks alias")

    differences = fiber.wrapped_differences()
    members = []
    for x in base:
        if f.is_zero:
            block = np.zeros((fiber.size, fiber.size), dtype=complex)
        else:
            block = f(x[None, None, :], differences)
        members.append(DiscreteOperator(fiber, kernel=block, label=f"pi0({f.label})@{x.tolist()}"))
    return OperatorFamily(tuple(members), base, label=f"pi0({f.label})")


def pi0_symbol_norm(f: Symbol, grid: HalfSpaceGrid, fiber: FiberGrid) -> float:
    """Norm of assemble_pi0 read off the trapezoid transform at the matched covariables."""
    return symbol_sup_norm(fiberwise_fourier(f, fiber.covariables, grid.nodes, fiber=fiber))


def _tangential_transform(values: np.ndarray, u: np.ndarray, weights: np.ndarray,
                          sigma: float) -> np.ndarray:
    # values (..., M) sampled at tangential nodes u (M,)
    return values @ (weights * np.exp(-1j * u * sigma))


def assemble_pi0_boundary(f: Symbol, kernel: BoundaryKernel, grid: HalfSpaceGrid, *,
                          base_points: Optional[np.ndarray] = None,
                          frequencies: Optional[np.ndarray] = None,
                          resolution: float = RESOLUTION_FACTOR) -> Operator:
    """
    The boundary representation at hbar = 0.

    In dim 1 this is the half-line operator with kernel f(0, v - w) + K(v, w). In dim 2
    the tangential Fourier transform freezes (x', sigma') and the result is the family of
    half-line operators indexed by them.
    """
    if f.dim != kernel.dim:
        raise GridError(f"Symbol dim {f.dim} does not match kernel dim {kernel.dim}")
    if grid.interior:
        raise GridError("The boundary representation needs a half-space grid")

    line = make_grid(1, grid.normal_extent, points=grid.points_normal)
    for radius, what in ((f.decay_radius, f.label), (kernel.decay_radius, kernel.label)):
        check_resolution(line, 1.0, radius, resolution, what)

    v = line.normal_nodes
    vn = v[:, None]
    wn = v[None, :]

    if f.dim == 1:
        label = f"pi0d({f.label}, {kernel.label})"
        values = np.zeros((line.size, line.size), dtype=complex)
        if not f.is_zero:
            values += f(np.zeros((1, 1, 1)), (vn - wn)[..., None])
        if not kernel.is_zero:
            values += kernel(np.zeros((1, 1, 0)), np.zeros((1, 1, 0)), vn, wn)
        return DiscreteOperator(line, kernel=values, label=label)

    if base_points is None:
        base_points = grid.tangential_nodes
    if frequencies is None:
        frequencies = covariable_grid(1, 4.0, 9)[:, 0]
    base_points = np.atleast_1d(np.asarray(base_points, dtype=float))
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))

    sigma_max = float(np.max(np.abs(frequencies))) if frequencies.size else 0.0
    nyquist = math.pi / sigma_max if sigma_max > 0 else math.inf
    reach = BOX_FACTOR * max(f.decay_radius, kernel.decay_radius)
    step = min(f.fiber_step if not f.is_zero else math.inf,
               kernel.step if not kernel.is_zero else math.inf, nyquist)
    if not math.isfinite(step):
        step = 1.0
    u, u_weights = box_rule(1, reach, step)
    u = u[:, 0]

    members = []
    parameters = []
    for xp in base_points:
        tangential_x = np.full((1, 1, 1, 1), xp)
        sampled_f = None
        sampled_k = None
        if not f.is_zero:
            # f((x', 0), (u', v_n - w_n)) with u' last
            x = join(tangential_x, 0.0)
            fiber = join(u[None, None, :, None], (vn - wn)[..., None])
            sampled_f = f(x, fiber)
        if not kernel.is_zero:
            sampled_k = kernel(tangential_x, u[None, None, :, None], vn[..., None], wn[..., None])
        for sigma in frequencies:
            values = np.zeros((line.size, line.size), dtype=complex)
            if sampled_f is not None:
                values += _tangential_transform(sampled_f, u, u_weights, sigma)
            if sampled_k is not None:
                values += _tangential_transform(sampled_k, u, u_weights, sigma)
            members.append(DiscreteOperator(line, kernel=values,
                                            label=f"pi0d({f.label}, {kernel.label})@({xp:g},{sigma:g})"))
            parameters.append((xp, sigma))
    return OperatorFamily(tuple(members), np.array(parameters),
                          label=f"pi0d({f.label}, {kernel.label})")


def assemble_pi0_boundary_element(element: Union[Symbol, BoundaryKernel, BoundaryElement],
                                  grid: HalfSpaceGrid, **options) -> Operator:
    f, k = as_element(element)
    return assemble_pi0_boundary(f, k, grid, **options)


# ---------------------------------------------------------------------------
# Projections and dilations
# ---------------------------------------------------------------------------

def slab_thickness(hbar: float, schedule: Union[float, Callable[[float], float]] = DEFAULT_BETA) -> float:
    """a_hbar = hbar ** beta, or a callable schedule."""
    if callable(schedule):
        return float(schedule(hbar))
    return float(hbar) ** float(schedule)


def boundary_projection(hbar: float, grid: HalfSpaceGrid,
                        schedule: Union[float, Callable[[float], float]] = DEFAULT_BETA) -> DiscreteOperator:
    """Multiplication by the indicator of the boundary slab {x_n < a_hbar}."""
    if grid.interior:
        raise GridError("Boundary projections need a half-space grid")
    thickness = slab_thickness(hbar, schedule)
    if not thickness > 0:
        raise GridError(f"Slab thickness must be positive, got {thickness:g} at hbar={hbar:g}")
    if thickness >= grid.normal_extent:
        mask = np.ones(grid.size)
    else:
        mask = (grid.normal_coordinates < thickness).astype(float)
    return DiscreteOperator(grid, multiplier=mask, label=f"P[{hbar:g}](a={thickness:g})")


def truncation_window(grid: HalfSpaceGrid, margin: float) -> DiscreteOperator:
    """
    Indicator of the nodes at least ``margin`` away from the artificial cut ends of the
    grid (the far normal end, both normal ends of an interior grid, both tangential ends).
    """
    nodes = grid.nodes
    lo, hi = grid.normal_range
    normal = nodes[:, -1]
    keep = normal <= hi - margin
    if grid.interior:
        keep &= normal >= lo + margin
    if grid.dim == 2:
        keep &= np.abs(nodes[:, 0]) <= grid.tangential_extent - margin
    if not np.any(keep):
        raise GridError(f"Truncation margin {margin:g} leaves no nodes on {grid.describe()}")
    return DiscreteOperator(grid, multiplier=keep.astype(float), label=f"window({margin:g})")


def dilation(hbar: float, grid: HalfSpaceGrid) -> DiscreteOperator:
    """
    (D_hbar xi)(x', x_n) = hbar^1/2 xi(x', hbar x_n), by linear interpolation along the
    normal axis.
    """
    _check_hbar(hbar)
    if hbar == 1:
        return identity(grid)
    normal_nodes = grid.normal_nodes
    lo, _ = grid.normal_range
    h = grid.normal_spacing
    target = hbar * normal_nodes
    if np.any(target < normal_nodes[0] - 1e-12) or np.any(target > normal_nodes[-1] + 1e-12):
        raise GridError(f"Dilation by {hbar:g} leaves the grid {grid.describe()}")

    position = np.clip((target - lo) / h, 0, len(normal_nodes) - 1)
    left = np.minimum(np.floor(position).astype(int), len(normal_nodes) - 2)
    frac = position - left
    line = np.zeros((len(normal_nodes), len(normal_nodes)))
    rows = np.arange(len(normal_nodes))
    line[rows, left] += 1 - frac
    line[rows, left + 1] += frac

    if grid.dim == 1:
        interp = line
    else:
        interp = np.kron(np.eye(grid.points_tangential), line)
    kernel = math.sqrt(hbar) * interp / grid.weights[None, :]
    return DiscreteOperator(grid, kernel=kernel.astype(complex), label=f"D[{hbar:g}]")


def identity(grid: Grid) -> DiscreteOperator:
    return DiscreteOperator(grid, multiplier=np.ones(len(grid.weights)), label="I")


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------

def compose(a: Operator, b: Operator) -> Operator:
    """Weighted product: kernel K_A diag(w) K_B."""
    if isinstance(a, OperatorFamily) or isinstance(b, OperatorFamily):
        if not (isinstance(a, OperatorFamily) and isinstance(b, OperatorFamily)):
            raise GridError("Cannot compose an operator family with a single operator")
        return a._zip(b, compose, f"{a.label} . {b.label}")

    _check_same_grid(a, b)
    label = f"{a.label} . {b.label}"
    if a.is_multiplier and b.is_multiplier:
        return DiscreteOperator(a.grid, multiplier=a.multiplier * b.multiplier, label=label)
    if a.is_multiplier:
        return DiscreteOperator(a.grid, kernel=a.multiplier[:, None] * b.kernel, label=label)
    if b.is_multiplier:
        return DiscreteOperator(a.grid, kernel=a.kernel * b.multiplier[None, :], label=label)
    return DiscreteOperator(a.grid, kernel=a.kernel @ (a.weights[:, None] * b.kernel), label=label)


def adjoint(a: Operator) -> Operator:
    """Adjoint in the weighted inner product: conjugate transpose of the kernel."""
    if isinstance(a, OperatorFamily):
        return OperatorFamily(tuple(adjoint(m) for m in a), a.parameters, f"({a.label})^*")
    if a.is_multiplier:
        return DiscreteOperator(a.grid, multiplier=np.conj(a.multiplier), label=f"({a.label})^*")
    return DiscreteOperator(a.grid, kernel=np.conj(a.kernel).T.copy(), label=f"({a.label})^*")


def compress(projection: DiscreteOperator, a: DiscreteOperator) -> DiscreteOperator:
    """P A P."""
    return compose(compose(projection, a), projection)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def _lanczos(a: DiscreteOperator, tol: float, max_iter: int, seed: int) -> NormEstimate:
    """
    Largest eigenvalue of the Gram operator A*A by restarted Lanczos.

    Stops once ||A*A x - lam x|| <= tol * lam; ``max_iter`` caps the restarts.
    """
    root = np.sqrt(a.weights)
    n = a.size
    if a.is_multiplier:
        m = a.multiplier
        matvec = lambda x: m * x  # noqa: E731
        rmatvec = lambda y: np.conj(m) * y  # noqa: E731
    else:
        kernel = a.kernel
        matvec = lambda x: root * (kernel @ (root * x))  # noqa: E731
        rmatvec = lambda y: root * (np.conj(kernel).T @ (root * y))  # noqa: E731

    products = 0

    def gram(x: np.ndarray) -> np.ndarray:
        nonlocal products
        products += 1
        return rmatvec(matvec(np.ravel(x)))

    op = LinearOperator((n, n), matvec=gram, rmatvec=gram, dtype=complex)
    rng = np.random.default_rng(seed)
    start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if not np.any(matvec(start)):
        return NormEstimate(0.0, "lanczos", 1, 0.0)

    def residual_of(lam: float, x: np.ndarray) -> float:
        return float(np.linalg.norm(op.matvec(x) - lam * x) / lam) if lam > 0 else 0.0

    try:
        values, vectors = eigsh(op, k=1, which="LM", v0=start, tol=tol, maxiter=max_iter,
                                ncv=min(n - 1, NORM_KRYLOV_DIM))
    except ArpackNoConvergence as e:
        residual = math.inf
        if len(e.eigenvalues):
            residual = residual_of(float(np.real(e.eigenvalues[0])), e.eigenvectors[:, 0])
        raise ConvergenceError(f"Lanczos on {a.label!r} did not converge", max_iter, residual) from None

    lam = max(float(np.real(values[0])), 0.0)
    x = vectors[:, 0] / np.linalg.norm(vectors[:, 0])
    return NormEstimate(math.sqrt(lam), "lanczos", products, residual_of(lam, x))


def operator_norm(a: Operator, method: str = "auto", tol: float = NORM_TOL,
                  max_iter: int = NORM_MAX_ITER, seed: int = NORM_SEED) -> NormEstimate:
    """
    Largest singular value on the weighted discrete L2 space.

    ``method`` is ``svd``, ``power`` (matrix-free Lanczos) or ``auto`` (SVD up to
    SVD_MAX_NODES nodes).
    Families report the supremum over their members.
    """
    if not tol > 0:
        raise GridError(f"Norm tolerance must be positive, got {tol}")
    if method not in ("auto", "svd", "power"):
        raise GridError(f"Unknown norm method {method!r}")

    if isinstance(a, OperatorFamily):
        estimates = [operator_norm(m, method, tol, max_iter, seed) for m in a]
        best = max(estimates, key=lambda e: e.value)
        return NormEstimate(best.value, best.method, sum(e.iterations for e in estimates),
                            max(e.residual for e in estimates), members=len(estimates))

    if a.is_multiplier and method != "power":
        return NormEstimate(float(np.max(np.abs(a.multiplier), initial=0.0)), "svd")

    # ARPACK needs at least four unknowns for one complex Ritz pair
    use_svd = method == "svd" or a.size < 4 or (method == "auto" and a.size <= SVD_MAX_NODES)
    if use_svd:
        values = svdvals(a.weighted_matrix())
        return NormEstimate(float(values[0]) if values.size else 0.0, "svd")

    estimate = _lanczos(a, tol, max_iter, seed)
    logger.debug(f"Lanczos on {a.label}: {estimate.iterations} products, "
                 f"residual {estimate.residual:.2e}")
    return estimate


def vanishing_estimate(f: Symbol, hbar: float, grid: HalfSpaceGrid, **norm_options) -> float:
    """Ratio ||rho_hbar(f)|| / sup |f| sampled over grid nodes and the fiber box."""
    if f.is_zero:
        return 0.0
    fiber, _ = box_rule(f.dim, f.decay_radius, f.fiber_step)
    sup = float(np.max(np.abs(f(grid.nodes[:, None, :], fiber[None, :, :]))))
    if sup == 0:
        return 0.0
    return operator_norm(assemble_rho(f, hbar, grid), **norm_options).value / sup


# ---------------------------------------------------------------------------
# Binary dumps
# ---------------------------------------------------------------------------

def write_operator(a: DiscreteOperator, path: Union[str, Path]) -> Path:
    """
    Little-endian dump: 8-byte magic, uint64 rows, uint64 cols, then the kernel as
    row-major complex128.
    """
    kernel = np.ascontiguousarray(a.matrix(), dtype='<c16')
    rows, cols = kernel.shape
    payload = _HEADER.pack(OPERATOR_MAGIC, rows, cols) + kernel.tobytes(order='C')
    return atomic_write(path, payload)


def read_operator(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ReportError(f"Failed to read operator ({e.strerror or e})", str(path)) from e
    if len(data) < _HEADER.size:
        raise ReportError("Truncated operator header", str(path))
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != OPERATOR_MAGIC:
        raise ReportError(f"Bad operator magic {magic!r}", str(path))
    expected = _HEADER.size + rows * cols * 16
    if len(data) != expected:
        raise ReportError(f"Operator payload has {len(data)} bytes, expected {expected}", str(path))
    return np.frombuffer(data, dtype='<c16', offset=_HEADER.size).reshape(rows, cols).astype(complex)

