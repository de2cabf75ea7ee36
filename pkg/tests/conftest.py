"""
Shared fixtures for the semiclass test suite
"""

import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import yaml

from semiclass.catalog import resolve_kernel, resolve_symbol

REPO_ROOT = Path(__file__).parent.parent
EXPERIMENTS_DIR = REPO_ROOT / "experiments"

SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2 * math.pi)
# int_0^inf exp(-2 s^2) ds
HALF_LINE_MASS = 0.5 * math.sqrt(math.pi / 2)


def twisted(f, k=0.7, q=0.3):
    """f(x, v) exp(i k v_n + i q x_n): complex valued, same decay and steps as f."""
    def evaluate(x, v, _f=f):
        return _f(x, v) * np.exp(1j * k * v[..., -1] + 1j * q * x[..., -1])
    return replace(f, base_eval=evaluate, label=f"twist({f.label})", spectrum=None,
                   spectral_radius=f.spectral_radius + abs(k))


@pytest.fixture
def gauss():
    """gauss:b=1, no base decay: f(x, v) = exp(-v^2), f^(sigma) = sqrt(pi) exp(-sigma^2/4)."""
    return resolve_symbol("gauss:b=1")


@pytest.fixture
def gauss_half():
    """gauss:b=0.5: sup |f^| = sqrt(2 pi)."""
    return resolve_symbol("gauss:b=0.5")


@pytest.fixture
def rank_one():
    """rank1:a=1,b=1 in dim 1."""
    return resolve_kernel("rank1:a=1,b=1")


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML experiment file and return its path."""
    def _write(tree, name="experiment.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(tree, sort_keys=False), encoding='utf-8')
        return path
    return _write
