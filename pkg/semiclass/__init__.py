# Semiclassical half-space operators
# Discretizes hbar-scaled truncated operators, asymptotic Green operators and their
# boundary representations, and checks their limits by operator-norm experiments.

from .catalog import list_catalog, resolve_kernel, resolve_symbol
from .errors import (
    ConfigError,
    ConvergenceError,
    GridError,
    ReportError,
    ResolutionError,
    SemiclassError,
)
from .harness import ExperimentConfig, load_config, run_experiment
from .operators import (
    DiscreteOperator,
    NormEstimate,
    OperatorFamily,
    adjoint,
    assemble_element,
    assemble_kappa,
    assemble_pi0,
    assemble_pi0_boundary,
    assemble_rho,
    boundary_projection,
    compose,
    dilation,
    operator_norm,
)
from .report import ConvergenceReport, emit_report
from .symbolics import (
    BoundaryElement,
    BoundaryKernel,
    HalfSpaceGrid,
    SampledSpectrum,
    Symbol,
    convolve_symbols,
    convolve_symbols_hbar,
    fiberwise_fourier,
    leftover_l,
    leftover_l_hbar,
    make_grid,
    star_prime,
    symbol_sup_norm,
)
from .toeplitz import (
    CircleSymbol,
    ToeplitzMatrix,
    cayley_symbol,
    commutator_compactness,
    equivalence_report,
    half_convolution_assemble,
    toeplitz_assemble,
)

__version__ = "0.1.0"

__all__ = [
    'BoundaryElement', 'BoundaryKernel', 'CircleSymbol', 'ConfigError', 'ConvergenceError',
    'ConvergenceReport', 'DiscreteOperator', 'ExperimentConfig', 'GridError', 'HalfSpaceGrid',
    'NormEstimate', 'OperatorFamily', 'ReportError', 'ResolutionError', 'SampledSpectrum',
    'SemiclassError', 'Symbol', 'ToeplitzMatrix', 'adjoint', 'assemble_element', 'assemble_kappa',
    'assemble_pi0', 'assemble_pi0_boundary', 'assemble_rho', 'boundary_projection', 'cayley_symbol',
    'commutator_compactness', 'compose', 'convolve_symbols', 'convolve_symbols_hbar', 'dilation',
    'emit_report', 'equivalence_report', 'fiberwise_fourier', 'half_convolution_assemble',
    'leftover_l', 'leftover_l_hbar', 'list_catalog', 'load_config', 'make_grid', 'operator_norm',
    'resolve_kernel', 'resolve_symbol', 'run_experiment', 'star_prime', 'symbol_sup_norm',
    'toeplitz_assemble',
]
