"""
Tests for grids, the fiberwise Fourier transform and the symbol calculus
"""

import math

import numpy as np
import pytest

from semiclass.catalog import resolve_kernel, resolve_symbol
from semiclass.errors import GridError, ResolutionError
from semiclass.symbolics import (
    BoundaryElement,
    FiberGrid,
    as_element,
    convolve_symbols,
    convolve_symbols_hbar,
    covariable_grid,
    element_involution,
    export_csv,
    fiberwise_fourier,
    half_line_rule,
    kernel_involution,
    kernel_sum,
    leftover_l,
    leftover_l_hbar,
    make_grid,
    make_interior_grid,
    star_prime,
    sup_norm_reference,
    symbol_conjugate,
    symbol_involution,
    symbol_sup_norm,
    zero_kernel,
    zero_symbol,
)

from .conftest import HALF_LINE_MASS, SQRT_2PI, SQRT_PI, twisted


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

def test_half_line_grid_trapezoid_weights():
    """Three nodes on [0, 1] carry weights 1/4, 1/2, 1/4"""
    grid = make_grid(1, 1.0, points=3)
    np.testing.assert_allclose(grid.normal_nodes, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(grid.weights, [0.25, 0.5, 0.25])
    assert grid.nodes.shape == (3, 1)
    assert grid.spacing == pytest.approx(0.5)


def test_two_dimensional_grid_layout():
    grid = make_grid(2, 1.0, 2.0, points=(3, 5))
    assert grid.shape == (5, 3)
    assert grid.size == 15
    assert grid.weights.sum() == pytest.approx(grid.measure)
    assert grid.measure == pytest.approx(4.0)
    # tangential-major: the normal coordinate runs fastest
    np.testing.assert_allclose(grid.nodes[:3, 1], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(grid.nodes[:3, 0], [-2.0, -2.0, -2.0])


def test_interior_grid_is_symmetric():
    grid = make_interior_grid(1, 2.0, points=5)
    assert grid.normal_range == (-2.0, 2.0)
    np.testing.assert_allclose(grid.normal_nodes, [-2, -1, 0, 1, 2])


@pytest.mark.parametrize("args", [
    (3, 1.0, None, 3),
    (1, 0.0, None, 3),
    (1, 1.0, None, 1),
    (2, 1.0, None, 3),
    (2, 1.0, 1.0, (3,)),
])
def test_invalid_grids_raise(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_fiber_grid_covariables_and_wrapping():
    fiber = FiberGrid(1, 8, 0.5)
    assert fiber.period == 4.0
    np.testing.assert_allclose(fiber.axis_nodes, np.arange(-4, 4) * 0.5)
    diffs = fiber.wrapped_differences()[..., 0]
    assert diffs.min() == pytest.approx(-2.0)
    assert diffs.max() == pytest.approx(1.5)
    np.testing.assert_allclose(fiber.covariables[:, 0], 2 * np.pi * np.fft.fftfreq(8, 0.5))


# ---------------------------------------------------------------------------
# Fiberwise Fourier transform
# ---------------------------------------------------------------------------

def test_gaussian_transform_matches_closed_form(gauss):
    sigma = covariable_grid(1, 4.0, 17)
    sampled = fiberwise_fourier(gauss, sigma)
    exact = SQRT_PI * np.exp(-sigma[:, 0] ** 2 / 4)
    np.testing.assert_allclose(sampled.samples[0], exact, atol=1e-8)


@pytest.mark.parametrize("entry_id,value", [
    ("gauss:b=0.5", SQRT_2PI),
    ("gauss:b=2", math.sqrt(math.pi / 2)),
    ("gauss:b=1,c=3", 3 * SQRT_PI),
])
def test_transform_at_zero_covariable(entry_id, value):
    f = resolve_symbol(entry_id)
    assert fiberwise_fourier(f, [0.0]).samples[0, 0] == pytest.approx(value, rel=1e-10)


def test_shifted_gaussian_transform_carries_phase():
    f = resolve_symbol("gauss:b=1,v0=1")
    sigma = np.array([[0.5], [1.0], [2.0]])
    sampled = fiberwise_fourier(f, sigma).samples[0]
    np.testing.assert_allclose(sampled, f.spectrum(np.zeros((1, 1)), sigma), atol=1e-8)


def test_transform_in_two_dimensions():
    f = resolve_symbol("gauss:b=1", dim=2)
    sigma = np.array([[0.0, 0.0], [1.0, -0.5]])
    sampled = fiberwise_fourier(f, sigma).samples[0]
    exact = math.pi * np.exp(-np.sum(sigma ** 2, axis=-1) / 4)
    np.testing.assert_allclose(sampled, exact, atol=1e-8)


def test_transform_follows_base_point():
    f = resolve_symbol("gauss:a=1,b=1")
    sampled = fiberwise_fourier(f, [0.0], base_points=[0.0, 1.0])
    np.testing.assert_allclose(sampled.samples[:, 0], [SQRT_PI, SQRT_PI * math.exp(-1)], rtol=1e-10)


def test_coarse_explicit_step_raises_resolution_error(gauss):
    with pytest.raises(ResolutionError) as info:
        fiberwise_fourier(gauss, [10.0], step=1.0)
    assert info.value.required_spacing == pytest.approx(math.pi / 10)


def test_zero_symbol_transform_is_zero():
    sampled = fiberwise_fourier(zero_symbol(1), covariable_grid(1, 2.0, 5))
    assert symbol_sup_norm(sampled) == 0.0


def test_sup_norm_reference(gauss_half):
    assert sup_norm_reference(gauss_half) == pytest.approx(SQRT_2PI, rel=1e-10)


def test_export_csv(tmp_path, gauss):
    sampled = fiberwise_fourier(gauss, [[0.0], [1.0]], base_points=[[0.0], [1.0]])
    path = export_csv(sampled, tmp_path / "spectrum.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,sigma1,re,im"
    assert len(lines) == 5
    assert float(lines[1].split(',')[2]) == pytest.approx(SQRT_PI)


# ---------------------------------------------------------------------------
# Products
# ---------------------------------------------------------------------------

def test_convolution_of_gaussians(gauss):
    product = convolve_symbols(gauss, gauss)
    w = np.array([0.0, 1.0, -2.0])
    exact = math.sqrt(math.pi / 2) * np.exp(-w ** 2 / 2)
    np.testing.assert_allclose(product(np.zeros((3, 1)), w[:, None]), exact, atol=1e-9)
    assert product.spectrum is not None
    assert product.decay_radius == pytest.approx(2 * gauss.decay_radius)


def test_hbar_convolution_without_base_dependence_matches(gauss):
    f = resolve_symbol("gauss:b=0.5")
    plain = convolve_symbols(f, gauss)
    scaled = convolve_symbols_hbar(f, gauss, 0.25)
    x = np.array([[0.0], [0.7]])
    w = np.array([[0.3], [-1.2]])
    np.testing.assert_allclose(scaled(x, w), plain(x, w), atol=1e-12)
    assert scaled.spectrum is None


def test_hbar_convolution_sees_base_dependence():
    f = resolve_symbol("gauss:a=1,b=1")
    g = resolve_symbol("gauss:a=1,b=1,v0=1")
    x, w = np.array([0.5]), np.array([0.5])
    assert abs(convolve_symbols_hbar(f, g, 0.5)(x, w) - convolve_symbols(f, g)(x, w)) > 1e-3


@pytest.mark.parametrize("hbar", [0.0, -0.5, 1.5])
def test_hbar_out_of_range(gauss, hbar):
    with pytest.raises(GridError):
        convolve_symbols_hbar(gauss, gauss, hbar)


def test_leftover_at_the_corner(gauss):
    """l(f, f)(0, 0) = -int_0^inf exp(-2 t^2) dt = -0.62666"""
    kernel = leftover_l(gauss, gauss)
    assert kernel(0.0, 0.0, 0.0, 0.0).real == pytest.approx(-HALF_LINE_MASS, rel=1e-10)
    assert HALF_LINE_MASS == pytest.approx(0.62666, abs=1e-5)


def test_leftover_off_the_corner(gauss):
    """With x_n = y_n = 1 the integrand is exp(-(1+t)^2) exp(-(1+t)^2)"""
    value = leftover_l(gauss, gauss)(0.0, 0.0, 1.0, 1.0)
    nodes, weights = half_line_rule(10.0, 0.05)
    expected = -np.sum(np.exp(-2 * (1 + nodes) ** 2) * weights)
    assert value.real == pytest.approx(expected, rel=1e-10)


def test_leftover_hbar_reduces_without_base_dependence(gauss):
    f = resolve_symbol("gauss:b=0.5,v0=0.5")
    plain = leftover_l(f, gauss)
    scaled = leftover_l_hbar(f, gauss, 0.5)
    vn = np.array([0.0, 0.5, 2.0])
    wn = np.array([1.0, 0.0, 0.25])
    np.testing.assert_allclose(scaled(0.0, 0.0, vn, wn), plain(0.0, 0.0, vn, wn), atol=1e-12)


def test_leftover_in_two_dimensions():
    f = resolve_symbol("gauss:b=1", dim=2)
    kernel = leftover_l(f, f)
    # tangential integral contributes sqrt(pi/2) exp(-u^2/2)
    value = kernel(np.array([0.0]), np.array([0.0]), 0.0, 0.0)
    assert value.real == pytest.approx(-HALF_LINE_MASS * math.sqrt(math.pi / 2), rel=1e-8)


def test_half_line_rule_integrates_polynomials():
    nodes, weights = half_line_rule(3.0, 0.1)
    assert nodes.min() > 0 and nodes.max() < 3.0
    assert np.sum(weights * nodes ** 5) == pytest.approx(3.0 ** 6 / 6, rel=1e-12)


def test_star_prime_of_pure_symbols(gauss):
    f = resolve_symbol("gauss:b=0.5")
    element = star_prime(f, gauss)
    symbol, kernel = element
    reference = leftover_l(f, gauss)
    np.testing.assert_allclose(kernel(0.0, 0.0, [0.0, 1.0], [0.5, 0.0]),
                               reference(0.0, 0.0, [0.0, 1.0], [0.5, 0.0]), atol=1e-14)
    np.testing.assert_allclose(symbol(0.0, [0.0, 1.0]), convolve_symbols(f, gauss)(0.0, [0.0, 1.0]))


def test_star_prime_with_zero_parts_drops_them(gauss):
    element = star_prime(as_element(zero_kernel(1)), gauss)
    assert element.symbol.is_zero
    assert element.kernel.is_zero


def test_star_prime_symbol_times_kernel(gauss, rank_one):
    """(f + 0) *' (0 + K) is the half-convolution f o K"""
    _, kernel = star_prime(gauss, rank_one)
    # (f o K)(v, w) = int_0^inf exp(-(v - z)^2) exp(-z^2) dz exp(-w^2)
    nodes, weights = half_line_rule(10.0, 0.05)
    expected = np.sum(np.exp(-(0.5 - nodes) ** 2) * np.exp(-nodes ** 2) * weights) * math.exp(-0.25)
    assert kernel(0.0, 0.0, 0.5, 0.5).real == pytest.approx(expected, rel=1e-8)


def test_kernel_sum_adds_pointwise(rank_one):
    other = resolve_kernel("rank1:a=1,b=1,c=2")
    total = kernel_sum([rank_one, zero_kernel(1), other])
    assert total(0.0, 0.0, 0.0, 0.0).real == pytest.approx(3.0)
    with pytest.raises(GridError):
        kernel_sum([])


def test_involutions():
    f = resolve_symbol("gauss:b=1,v0=1,c=2")
    star = symbol_involution(f)
    assert complex(star(0.0, -1.0)) == pytest.approx(complex(np.conj(f(0.0, 1.0))))
    conj = symbol_conjugate(f)
    np.testing.assert_allclose(conj.spectrum(np.zeros((1, 1)), np.array([[0.5]])),
                               np.conj(f.spectrum(np.zeros((1, 1)), np.array([[-0.5]]))))

    kernel = resolve_kernel("rank1:a=1,b=2,p=0.5")
    adjoint = kernel_involution(kernel)
    assert complex(adjoint(0.0, 0.0, 0.0, 1.0)) == pytest.approx(complex(np.conj(kernel(0.0, 0.0, 1.0, 0.0))))

    element = element_involution(BoundaryElement(f, kernel))
    assert element.symbol.label == "(gauss:b=1,v0=1,c=2)^*"


def test_element_dimension_mismatch():
    with pytest.raises(GridError):
        BoundaryElement(resolve_symbol("gauss", 2), zero_kernel(1))


# ---------------------------------------------------------------------------
# Calculus identities
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("f_id,g_id", [
    ("gauss:b=0.5,v0=0.5", "gauss:b=1,v0=-1"),
    ("gauss:a=1,b=1,x0=0.5", "gauss:a=2,b=0.5"),
    ("bump:s=2", "gauss:b=1"),
    ("cauchy:b=1", "gauss:b=2"),
])
def test_transform_of_a_convolution_is_the_product(f_id, g_id):
    f, g = resolve_symbol(f_id), resolve_symbol(g_id)
    sigma = np.array([-1.5, -0.5, 0.0, 0.7, 2.0])
    base = np.array([0.0, 0.7])
    product = fiberwise_fourier(convolve_symbols(f, g), sigma, base).samples
    expected = fiberwise_fourier(f, sigma, base).samples * fiberwise_fourier(g, sigma, base).samples
    np.testing.assert_allclose(product, expected, atol=1e-9 * np.max(np.abs(expected)))


def test_hbar_corrections_shrink_towards_zero():
    """max |l_hbar - l| and max |f *_hbar g - f*g| over sample nodes along hbar = 2^-k, k >= 3"""
    f = resolve_symbol("gauss:a=1,b=0.5")
    g = resolve_symbol("gauss:a=1,b=1,v0=0.5")
    x = np.array([0.0, 0.5, 1.0])[:, None, None]
    w = np.array([-1.0, 0.0, 1.0])[None, :, None]
    vn = np.array([0.0, 0.5, 1.5])[:, None]
    wn = np.array([0.0, 0.5, 1.5])[None, :]
    plain = convolve_symbols(f, g)(x, w)
    green = leftover_l(f, g)(0.0, 0.0, vn, wn)

    symbol_gaps, kernel_gaps = [], []
    for k in range(3, 9):
        hbar = 2.0 ** -k
        symbol_gaps.append(np.max(np.abs(convolve_symbols_hbar(f, g, hbar)(x, w) - plain)))
        kernel_gaps.append(np.max(np.abs(leftover_l_hbar(f, g, hbar)(0.0, 0.0, vn, wn) - green)))

    for gaps in (symbol_gaps, kernel_gaps):
        assert all(b <= a * (1 + 1e-9) for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.1 * gaps[0]
        assert gaps[-1] < 1e-2


def test_conjugation_passes_through_products():
    f = twisted(resolve_symbol("gauss:a=1,b=0.5"))
    g = twisted(resolve_symbol("gauss:a=1,b=1,v0=0.5"), k=-1.1, q=0.9)
    cf, cg = symbol_conjugate(f), symbol_conjugate(g)
    x = np.array([[0.0], [0.4], [1.2]])
    w = np.array([[0.5], [-0.3], [1.0]])
    vn, wn = np.array([0.0, 0.3, 1.0]), np.array([0.6, 0.0, 2.0])

    assert np.max(np.abs(np.imag(convolve_symbols(f, g)(x, w)))) > 1e-3
    np.testing.assert_allclose(convolve_symbols(cf, cg)(x, w), np.conj(convolve_symbols(f, g)(x, w)),
                               atol=1e-14)
    np.testing.assert_allclose(convolve_symbols_hbar(cf, cg, 0.25)(x, w),
                               np.conj(convolve_symbols_hbar(f, g, 0.25)(x, w)), atol=1e-14)
    np.testing.assert_allclose(leftover_l(cf, cg)(0.0, 0.0, vn, wn),
                               np.conj(leftover_l(f, g)(0.0, 0.0, vn, wn)), atol=1e-14)
    np.testing.assert_allclose(leftover_l_hbar(cf, cg, 0.25)(0.0, 0.0, vn, wn),
                               np.conj(leftover_l_hbar(f, g, 0.25)(0.0, 0.0, vn, wn)), atol=1e-14)
