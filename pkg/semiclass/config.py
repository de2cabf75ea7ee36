"""
semiclass configuration
"""

# Values below this count as zero when sizing truncation radii
TRUNCATION_LEVEL = 1e-14

# Fourier convention recorded on every sampled spectrum
FOURIER_CONVENTION = "fhat(x,sigma) = int exp(-i<v,sigma>) f(x,v) dv; inverse carries (2pi)^-n"

# Quadrature
BOX_FACTOR = 1.5          # integration boxes cover 1.5x the decay radius
GAUSS_LEGENDRE_ORDER = 16  # nodes per half-line panel
PANEL_STEPS = 8            # panel length in units of the fiber step
EVAL_BUDGET = 1 << 20     # array entries per vectorized quadrature batch
ROW_BLOCK = 64             # kernel rows assembled per batch

# Grid spacing must satisfy spacing <= hbar * decay_radius / RESOLUTION_FACTOR
RESOLUTION_FACTOR = 8

# Operator norms
SVD_MAX_NODES = 2048
NORM_TOL = 1e-8
NORM_MAX_ITER = 5000
NORM_SEED = 1729
NORM_KRYLOV_DIM = 32

# Boundary slab a_hbar = hbar ** beta
DEFAULT_BETA = 0.5

# Toeplitz finite sections use SAMPLES_FACTOR * N_T roots of unity
SAMPLES_FACTOR = 4

# Thread count for sweeps
THREADS_ENV = "SEMICLASS_THREADS"

# Report layout
CSV_HEADER = ["experiment", "hbar", "value", "reference", "defect", "wall_ms"]

# Verdict thresholds: engineering choices, since only limits (not rates) are known.
THRESHOLDS = {
    "final_relative_error": 0.05,
    "compression_fraction": 0.95,
    "rank_one_relative_error": 1e-3,
    "quotient_slack": 1e-3,
    "decomposition_relative": 1e-2,
    "defect_ratio": 0.1,
    "refinement_gain": 3.0,
    "multiplicativity_relative": 1e-2,
    "toeplitz_gap": 1e-2,
    "cayley_vanishing": 1e-10,
    "commutator_tail": 1e-6,
    "commutator_index": 50,
    "monotone_slack": 1e-9,
}

# Boundary symbol/kernel pairs for the quotient lower bound
QUOTIENT_ELEMENTS = [
    ["gauss:b=0.5", "zero"],
    ["gauss:b=1", "zero"],
    ["gauss:b=0.5", "rank1:a=1,b=1"],
    ["gauss:b=0.5", "rank1:a=1,b=1,c=5"],
    ["gauss:b=2,v0=0.5", "rank1:a=0.5,b=2,p=1"],
    ["bump:s=2", "zero"],
    ["bump:s=2", "rank1:a=1,b=1,c=-1"],
    ["zero", "rank1:a=1,b=1"],
    ["gauss:b=1,c=-1", "rank1:a=1,b=1,c=2"],
    ["gauss:b=0.25", "rank1:a=0.5,b=0.5,p=2,q=2"],
]

# Symbol pairs for the boundary multiplicativity check
MULTIPLICATIVITY_PAIRS = [
    ["gauss:b=0.5", "gauss:b=0.5"],
    ["gauss:b=1", "gauss:b=0.5,v0=1"],
    ["gauss:b=2,v0=-0.5", "gauss:b=1"],
    ["bump:s=2", "gauss:b=1"],
]

# Symbol pairs for the exact decomposition companion of green-defect
DECOMPOSITION_PAIRS = [
    ["gauss:a=1,b=1,x0=0.5", "gauss:a=1,b=0.5,x0=1"],
    ["gauss:a=1,b=1,v0=-0.5", "gauss:a=1,b=2,v0=0.5"],
    ["bump:s=2,a=1", "gauss:a=1,b=1"],
    ["cauchy:b=1", "gauss:a=1,b=1"],
]

# Defaults merged under every experiment configuration file
DEFAULT_CONFIG = {
    "experiment": None,
    "grid": {
        "dim": 1,
        "normal_extent": 8.0,
        "tangential_extent": 4.0,
        "resolution": RESOLUTION_FACTOR,
        "max_points": 3000,
        "tangential_points": 17,
    },
    "hbar": {"start": 1.0, "halvings": 6},
    "norm": {
        "method": "auto",
        "tol": NORM_TOL,
        "max_iter": NORM_MAX_ITER,
        "seed": NORM_SEED,
    },
    "symbols": {
        "f": "gauss:a=1,b=0.5",
        "g": "gauss:a=1,b=1,v0=0.5",
        "pairs": MULTIPLICATIVITY_PAIRS,
    },
    "kernel": {"id": "zero"},
    "elements": QUOTIENT_ELEMENTS,
    "beta": DEFAULT_BETA,
    "boundary": {
        "line_extent": 256.0,
        "line_step": 0.25,
        "frequency_extent": 4.0,
        "frequency_points": 9,
    },
    "toeplitz": {
        "sizes": [128, 256, 512],
        "line_extent": 64.0,
        "line_step": 0.03125,
        "top": 10,
        "psi": "gauss:b=2,v0=1",
    },
    "refinement_check": False,
    "timing": False,
    "thresholds": THRESHOLDS,
    "output": "results",
}
