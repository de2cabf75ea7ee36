"""
Tests for catalogue ids and the named symbols and kernels
"""

import math

import numpy as np
import pytest

from semiclass.catalog import half_line_gauss_norm, list_catalog, resolve_kernel, resolve_symbol
from semiclass.errors import ConfigError
from semiclass.utils import parse_catalog_id

from .conftest import HALF_LINE_MASS


def test_parse_catalog_id():
    assert parse_catalog_id("gauss:a=1,b=0.5") == ("gauss", {"a": 1.0, "b": 0.5})
    assert parse_catalog_id(" zero ") == ("zero", {})
    assert parse_catalog_id("rank1:c=-2,") == ("rank1", {"c": -2.0})


@pytest.mark.parametrize("entry_id", ["", "Gauss!", "gauss:a", "gauss:a=x", "gauss:=1", "1gauss"])
def test_malformed_ids(entry_id):
    with pytest.raises(ConfigError):
        parse_catalog_id(entry_id)


@pytest.mark.parametrize("entry_id,resolver", [
    ("nope", resolve_symbol),
    ("gauss:q=1", resolve_symbol),
    ("gauss:b=0", resolve_symbol),
    ("bump:s=-1", resolve_symbol),
    ("rank1", resolve_symbol),
    ("gauss", resolve_kernel),
    ("rank1:a=0", resolve_kernel),
    ("zero:c=1", resolve_symbol),
])
def test_unresolvable_ids(entry_id, resolver):
    with pytest.raises(ConfigError):
        resolver(entry_id)


def test_unsupported_dimension():
    with pytest.raises(ConfigError):
        resolve_symbol("gauss", dim=3)


def test_zero_resolves_as_either_kind():
    assert resolve_symbol("zero").is_zero
    assert resolve_kernel("zero", dim=2).is_zero
    assert resolve_symbol("gauss:c=0").is_zero


def test_gauss_values():
    f = resolve_symbol("gauss:a=1,x0=1,b=2,c=3")
    assert complex(f(1.0, 0.0)) == pytest.approx(3.0)
    assert complex(f(0.0, 0.0)) == pytest.approx(3 * math.exp(-1))
    assert complex(f(1.0, 0.5)) == pytest.approx(3 * math.exp(-0.5))
    assert f.base_radius is not None
    assert f.label == "gauss:a=1,x0=1,b=2,c=3"


def test_gauss_shift_acts_on_normal_coordinate():
    f = resolve_symbol("gauss:b=1,v0=1", dim=2)
    assert complex(f([0.0, 0.0], [0.0, 1.0])) == pytest.approx(1.0)
    assert complex(f([0.0, 0.0], [1.0, 0.0])) == pytest.approx(math.exp(-2))


def test_gauss_decay_radius_bounds_truncation():
    f = resolve_symbol("gauss:b=0.5")
    tail = abs(complex(f(0.0, f.decay_radius)))
    assert tail <= 1e-14 * (1 + 1e-9)


def test_bump_support():
    f = resolve_symbol("bump:s=2")
    values = f(0.0, np.array([0.0, 1.0, 2.0, 3.0]))
    assert values[0] == pytest.approx(1.0)
    assert 0 < values[1].real < 1
    assert values[2] == 0 and values[3] == 0
    assert f.spectrum is None
    assert f.decay_radius == 2.0


def test_cauchy_has_no_base_radius():
    f = resolve_symbol("cauchy")
    assert f.base_radius is None
    assert complex(f(1.0, 0.0)) == pytest.approx(0.5)


def test_half_line_gauss_norm():
    assert half_line_gauss_norm(1.0, 0.0) ** 2 == pytest.approx(HALF_LINE_MASS)
    # far offsets recover the full-line norm (pi/2a)^(1/4)
    assert half_line_gauss_norm(0.5, 50.0) == pytest.approx(math.pi ** 0.25)


def test_rank_one_reference_norm():
    kernel = resolve_kernel("rank1:a=1,b=1")
    assert kernel.reference_norm == pytest.approx(HALF_LINE_MASS)
    assert complex(kernel(0.0, 0.0, 1.0, 0.0)) == pytest.approx(math.exp(-1))

    scaled = resolve_kernel("rank1:a=1,b=1,c=-2")
    assert scaled.reference_norm == pytest.approx(2 * HALF_LINE_MASS)


def test_rank_one_in_two_dimensions():
    kernel = resolve_kernel("rank1:a=1,b=1", dim=2)
    assert kernel.reference_norm == pytest.approx(HALF_LINE_MASS * math.sqrt(math.pi))
    assert complex(kernel([0.0], [1.0], 0.0, 0.0)) == pytest.approx(math.exp(-1))
    # base decay leaves no closed form
    assert resolve_kernel("rank1:m=1", dim=2).reference_norm is None


def test_list_catalog():
    entries = {e["name"]: e for e in list_catalog()}
    assert set(entries) == {"zero", "gauss", "bump", "cauchy", "rank1"}
    assert entries["rank1"]["kind"] == "kernel"
    assert entries["gauss"]["defaults"]["b"] == 1.0
