"""
Exception hierarchy for semiclass
"""

from typing import Optional


class SemiclassError(Exception):
    """Base class for every error raised by the package"""


class ConfigError(SemiclassError):
    """Invalid experiment configuration or unresolvable catalogue id"""


class GridError(SemiclassError):
    """Grid parameters or grid-dependent arguments out of range"""


class ResolutionError(SemiclassError):
    """Discretization too coarse for the requested operation"""

    def __init__(
        self,
        message: str,
        required_spacing: Optional[float] = None,
        finest_hbar: Optional[float] = None,
        required_points: Optional[int] = None,
    ):
        super().__init__(message)
        self.required_spacing = required_spacing
        self.finest_hbar = finest_hbar
        self.required_points = required_points


class ConvergenceError(SemiclassError):
    """Iterative norm estimate did not reach its tolerance"""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ReportError(SemiclassError):
    """Report could not be written"""

    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path
