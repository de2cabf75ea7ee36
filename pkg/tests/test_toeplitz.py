"""
Tests for Cayley symbols, finite sections and the half-convolution comparison
"""

import math

import numpy as np
import pytest

from semiclass.catalog import resolve_symbol
from semiclass.errors import GridError
from semiclass.operators import operator_norm
from semiclass.symbolics import make_grid
from semiclass.toeplitz import (
    cayley_covariables,
    cayley_symbol,
    cayley_vanishing_ok,
    circle_symbol,
    commutator_compactness,
    equivalence_report,
    fourier_coefficients,
    half_convolution_assemble,
    section_norms,
    toeplitz_assemble,
)

from .conftest import SQRT_2PI


def test_cayley_covariables():
    sigma = cayley_covariables(4)
    assert sigma[0] == 0
    assert sigma[1] == pytest.approx(-1.0)
    assert math.isnan(sigma[2])
    assert sigma[3] == pytest.approx(1.0)


def test_cayley_symbol_at_i(gauss_half):
    """z = i maps to sigma = -1: phi(i) = sqrt(2 pi) exp(-1/2) = 1.5203"""
    phi = cayley_symbol(gauss_half, 8)
    assert phi.samples[2] == pytest.approx(SQRT_2PI * math.exp(-0.5), rel=1e-12)
    assert abs(phi.samples[2]) == pytest.approx(1.5203, abs=1e-4)
    assert phi.samples[0] == pytest.approx(SQRT_2PI)


def test_cayley_symbol_vanishes_at_minus_one(gauss_half):
    phi = cayley_symbol(gauss_half, 64)
    assert phi.at_minus_one() == 0
    assert cayley_vanishing_ok(phi)
    assert phi.sup() == pytest.approx(SQRT_2PI)


def test_cayley_symbol_without_closed_form():
    f = resolve_symbol("bump:s=1")
    phi = cayley_symbol(f, 16)
    assert phi.samples[0].real > 0
    assert phi.at_minus_one() == 0


def test_cayley_symbol_rejects_bad_input(gauss_half):
    with pytest.raises(GridError):
        cayley_symbol(resolve_symbol("gauss", dim=2), 8)
    with pytest.raises(GridError):
        cayley_symbol(gauss_half, 1)
    with pytest.raises(GridError):
        cayley_symbol(gauss_half, 7).at_minus_one()


def test_shift_symbol_gives_shift_matrix():
    phi = circle_symbol(lambda z: z, 8, "z")
    coefficients = fourier_coefficients(phi)
    assert coefficients[1] == pytest.approx(1.0)
    section = toeplitz_assemble(phi, 4)
    np.testing.assert_allclose(section.entries, np.eye(4, k=-1), atol=1e-14)
    assert section.is_diagonal_constant()
    assert operator_norm(section.as_operator()).value == pytest.approx(1.0)


def test_section_size_is_bounded_by_samples(gauss_half):
    phi = cayley_symbol(gauss_half, 16)
    with pytest.raises(GridError):
        toeplitz_assemble(phi, 17)
    with pytest.raises(GridError):
        toeplitz_assemble(phi, 0)


def test_section_norms_grow_towards_the_symbol_sup(gauss_half):
    phi = cayley_symbol(gauss_half, 256)
    norms = section_norms(phi, [8, 16, 32, 64])
    assert all(b >= a - 1e-12 for a, b in zip(norms, norms[1:]))
    assert max(norms) <= phi.sup() * (1 + 1e-10)
    assert norms[-1] == pytest.approx(phi.sup(), rel=1e-2)


def test_commutator_of_shifts_has_rank_two():
    """[T_z, T_zbar] on a finite section is diag(-1, 0, ..., 0, 1)"""
    phi = circle_symbol(lambda z: z, 32)
    psi = circle_symbol(np.conj, 32)
    profile = commutator_compactness(phi, psi, [8, 16], index=3)
    for values in profile.leading(2):
        np.testing.assert_allclose(values, [1.0, 1.0], atol=1e-12)
    assert profile.tail_ratio() < 1e-12
    assert profile.to_dict()["sizes"] == [8, 16]


def test_commutator_of_cayley_symbols_decays(gauss_half):
    count = 256
    phi = cayley_symbol(gauss_half, count)
    psi = cayley_symbol(resolve_symbol("gauss:b=1"), count)
    profile = commutator_compactness(phi, psi, [32, 64], index=50)
    assert profile.tail_ratio() < 1e-3
    # leading values come from the corners and settle once the corners decouple
    small, large = profile.leading(1)
    assert large[0] > 0
    assert small[0] == pytest.approx(large[0], rel=1e-3)


def test_commutator_needs_matching_samples(gauss_half):
    with pytest.raises(GridError):
        commutator_compactness(cayley_symbol(gauss_half, 8), cayley_symbol(gauss_half, 16), [4])


def test_half_convolution_is_one_dimensional():
    with pytest.raises(GridError):
        half_convolution_assemble(resolve_symbol("gauss", dim=2), make_grid(2, 1.0, 1.0, points=3))


def test_half_convolution_norm_below_symbol_sup(gauss_half):
    grid = make_grid(1, 32.0, points=257)
    value = operator_norm(half_convolution_assemble(gauss_half, grid)).value
    assert value <= SQRT_2PI * (1 + 1e-9)
    assert value == pytest.approx(SQRT_2PI, rel=1e-2)


@pytest.mark.slow
def test_equivalence_report(gauss_half):
    report = equivalence_report(gauss_half, size=256, line_extent=64.0, line_step=1 / 16, top=5)
    assert report.passed()
    assert report.gap <= 1e-2
    assert report.minus_one == 0
    assert len(report.singular_value_gaps) == 5
    assert report.to_dict()["size"] == 256


@pytest.mark.parametrize("size", [128, 512])
def test_matrix_free_norm_of_a_section_matches_svd(gauss_half, size):
    """Top singular values of a finite section cluster near sup |phi|"""
    section = toeplitz_assemble(cayley_symbol(gauss_half, 4 * size), size).as_operator()
    svd = operator_norm(section, method="svd").value
    lanczos = operator_norm(section, method="power")
    assert lanczos.method == "lanczos"
    assert lanczos.value == pytest.approx(svd, rel=1e-6)


@pytest.mark.slow
def test_matrix_free_norm_of_a_half_convolution_matches_svd(gauss_half):
    grid = make_grid(1, 64.0, points=2049)
    op = half_convolution_assemble(gauss_half, grid)
    svd = operator_norm(op, method="svd").value
    assert operator_norm(op, method="power").value == pytest.approx(svd, rel=1e-6)
