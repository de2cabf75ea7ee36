"""
Catalogue of named symbols and boundary kernels.

Ids read ``name:key=value,...``, for example ``gauss:a=1,b=0.5`` or ``rank1:a=1,b=2,p=1``.
Shifts ``x0``/``v0`` and rank-one offsets ``p``/``q`` act on the normal coordinate.
Every entry is defined for all base points, which is the smooth extension off the
half-space that the half-space products evaluate.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.special import erf

from .config import TRUNCATION_LEVEL
from .errors import ConfigError
from .symbolics import BoundaryKernel, Symbol, zero_kernel, zero_symbol
from .utils import parse_catalog_id

logger = logging.getLogger(__name__)

# Bump transforms decay like exp(-sqrt(2 s |sigma|)); below TRUNCATION_LEVEL past this.
BUMP_SPECTRAL_SPAN = 1100.0


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str  # "symbol" or "kernel"
    defaults: Dict[str, float]
    description: str
    build: Callable[[int, Dict[str, float], str], object]


def _log_ratio(amplitude: float) -> float:
    return max(math.log(max(amplitude, TRUNCATION_LEVEL) / TRUNCATION_LEVEL), 1.0)


def _base_factor(x: np.ndarray, a: float, x0: float) -> np.ndarray:
    if a == 0:
        return np.ones(x.shape[:-1])
    shifted = x.copy()
    shifted[..., -1] -= x0
    return np.exp(-a * np.sum(shifted ** 2, axis=-1))


def _base_radius(a: float, x0: float, amplitude: float) -> Optional[float]:
    if a == 0:
        return None
    return abs(x0) + math.sqrt(_log_ratio(amplitude) / a)


def _gauss(dim: int, p: Dict[str, float], label: str) -> Symbol:
    a, b, x0, v0, c = p["a"], p["b"], p["x0"], p["v0"], p["c"]
    if b <= 0 or a < 0:
        raise ConfigError(f"gauss needs b > 0 and a >= 0: {label}")
    if c == 0:
        return zero_symbol(dim)

    shift = np.zeros(dim)
    shift[-1] = v0

    def evaluate(x, v):
        return c * _base_factor(x, a, x0) * np.exp(-b * np.sum((v - shift) ** 2, axis=-1))

    def spectrum(x, sigma):
        mass = (math.pi / b) ** (dim / 2)
        phase = np.exp(-1j * sigma[..., -1] * v0)
        return (c * mass * _base_factor(x, a, x0)
                * np.exp(-np.sum(sigma ** 2, axis=-1) / (4 * b)) * phase)

    peak = abs(c) * (math.pi / b) ** (dim / 2)
    return Symbol(
        dim=dim,
        base_eval=evaluate,
        decay_radius=abs(v0) + math.sqrt(_log_ratio(abs(c)) / b),
        label=label,
        fiber_step=0.25 / math.sqrt(b),
        spectral_radius=math.sqrt(4 * b * _log_ratio(peak)),
        base_radius=_base_radius(a, x0, abs(c)),
        spectrum=spectrum,
    )


def _bump(dim: int, p: Dict[str, float], label: str) -> Symbol:
    s, a, x0, v0, c = p["s"], p["a"], p["x0"], p["v0"], p["c"]
    if s <= 0 or a < 0:
        raise ConfigError(f"bump needs s > 0 and a >= 0: {label}")
    if c == 0:
        return zero_symbol(dim)

    shift = np.zeros(dim)
    shift[-1] = v0

    def evaluate(x, v):
        t2 = np.sum((v - shift) ** 2, axis=-1) / s ** 2
        inside = t2 < 1
        safe = np.where(inside, 1 - t2, 1.0)
        profile = np.where(inside, np.exp(1 - 1 / safe), 0.0)
        return c * _base_factor(x, a, x0) * profile

    return Symbol(
        dim=dim,
        base_eval=evaluate,
        decay_radius=abs(v0) + s,
        label=label,
        fiber_step=s / 64,
        spectral_radius=BUMP_SPECTRAL_SPAN / s,
        base_radius=_base_radius(a, x0, abs(c)),
    )


def _cauchy(dim: int, p: Dict[str, float], label: str) -> Symbol:
    b, c = p["b"], p["c"]
    if b <= 0:
        raise ConfigError(f"cauchy needs b > 0: {label}")
    if c == 0:
        return zero_symbol(dim)

    def weight(x):
        return 1 / (1 + np.sum(x ** 2, axis=-1))

    def evaluate(x, v):
        return c * weight(x) * np.exp(-b * np.sum(v ** 2, axis=-1))

    def spectrum(x, sigma):
        mass = (math.pi / b) ** (dim / 2)
        return c * mass * weight(x) * np.exp(-np.sum(sigma ** 2, axis=-1) / (4 * b))

    peak = abs(c) * (math.pi / b) ** (dim / 2)
    return Symbol(
        dim=dim,
        base_eval=evaluate,
        decay_radius=math.sqrt(_log_ratio(abs(c)) / b),
        label=label,
        fiber_step=0.25 / math.sqrt(b),
        spectral_radius=math.sqrt(4 * b * _log_ratio(peak)),
        base_radius=None,
        spectrum=spectrum,
    )


def half_line_gauss_norm(alpha: float, offset: float) -> float:
    """L2(R+) norm of exp(-alpha (s - offset)^2)."""
    root = math.sqrt(2 * alpha)
    return math.sqrt(0.5 * math.sqrt(math.pi / (2 * alpha)) * (1 + erf(offset * root)))


def _rank1(dim: int, p: Dict[str, float], label: str) -> BoundaryKernel:
    a, b, pp, q, c, t, m = p["a"], p["b"], p["p"], p["q"], p["c"], p["t"], p["m"]
    if a <= 0 or b <= 0 or t <= 0 or m < 0:
        raise ConfigError(f"rank1 needs a, b, t > 0 and m >= 0: {label}")
    if c == 0:
        return zero_kernel(dim)

    def evaluate(xp, up, vn, wn):
        value = c * np.exp(-a * (vn - pp) ** 2) * np.exp(-b * (wn - q) ** 2)
        if dim == 2:
            value = value * np.exp(-t * np.sum(up ** 2, axis=-1)) * np.exp(-m * np.sum(xp ** 2, axis=-1))
        return value

    ratio = _log_ratio(abs(c))
    radius = max(abs(pp) + math.sqrt(ratio / a), abs(q) + math.sqrt(ratio / b))
    if dim == 2:
        radius = max(radius, math.sqrt(ratio / t))

    norm: Optional[float] = abs(c) * half_line_gauss_norm(a, pp) * half_line_gauss_norm(b, q)
    if dim == 2:
        # tangential convolution by exp(-t|u|^2) has norm sqrt(pi/t) only without base decay
        norm = norm * math.sqrt(math.pi / t) if m == 0 else None

    return BoundaryKernel(
        dim=dim,
        eval=evaluate,
        decay_radius=radius,
        label=label,
        step=0.25 / math.sqrt(max(a, b, t if dim == 2 else 0.0)),
        reference_norm=norm,
    )


CATALOG: Dict[str, CatalogEntry] = {
    "zero": CatalogEntry("zero", "symbol", {}, "structural zero (symbol or kernel)",
                         lambda dim, p, label: zero_symbol(dim)),
    "gauss": CatalogEntry("gauss", "symbol", {"a": 0.0, "b": 1.0, "x0": 0.0, "v0": 0.0, "c": 1.0},
                          "c exp(-a|x - x0|^2 - b|v - v0|^2), closed-form transform", _gauss),
    "bump": CatalogEntry("bump", "symbol", {"s": 1.0, "a": 0.0, "x0": 0.0, "v0": 0.0, "c": 1.0},
                         "c exp(-a|x - x0|^2) exp(1 - 1/(1 - |v - v0|^2/s^2)), compact fiber support",
                         _bump),
    "cauchy": CatalogEntry("cauchy", "symbol", {"b": 0.5, "c": 1.0},
                           "c exp(-b|v|^2) / (1 + |x|^2), slow base decay", _cauchy),
    "rank1": CatalogEntry("rank1", "kernel",
                          {"a": 1.0, "b": 1.0, "p": 0.0, "q": 0.0, "c": 1.0, "t": 1.0, "m": 0.0},
                          "c exp(-a(v_n - p)^2) exp(-b(w_n - q)^2) [dim 2: exp(-t|u'|^2 - m|x'|^2)]",
                          _rank1),
}


def _resolve(entry_id: str, dim: int, kind: str):
    name, params = parse_catalog_id(entry_id)
    entry = CATALOG.get(name)
    if entry is None:
        raise ConfigError(f"Unknown catalogue entry {name!r} in {entry_id!r}")
    if dim not in (1, 2):
        raise ConfigError(f"Catalogue dimension must be 1 or 2, got {dim}")

    if name == "zero":
        if params:
            raise ConfigError(f"zero takes no parameters: {entry_id!r}")
        return zero_symbol(dim) if kind == "symbol" else zero_kernel(dim)
    if entry.kind != kind:
        raise ConfigError(f"{name!r} is a {entry.kind}, expected a {kind}")

    unknown = set(params) - set(entry.defaults)
    if unknown:
        raise ConfigError(f"Unknown parameters {sorted(unknown)} for {name!r}")
    merged = {**entry.defaults, **params}
    logger.debug(f"Resolved {entry_id} (dim {dim}) with {merged}")
    return entry.build(dim, merged, entry_id.strip())


def resolve_symbol(entry_id: str, dim: int = 1) -> Symbol:
    return _resolve(entry_id, dim, "symbol")


def resolve_kernel(entry_id: str, dim: int = 1) -> BoundaryKernel:
    return _resolve(entry_id, dim, "kernel")


def list_catalog() -> List[Dict]:
    """Catalogue entries as plain records for ``semiclass catalog``."""
    return [
        {"name": e.name, "kind": e.kind, "defaults": dict(e.defaults), "description": e.description}
        for e in CATALOG.values()
    ]
