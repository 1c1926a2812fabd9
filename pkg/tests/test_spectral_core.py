import math

import numpy as np
import pytest

from models.domain_model import DomainSpec
from models.field_model import SpectralField, PhysicalField
from services import spectral_core
from services.spectral_core import (
    analyze, build_basis, get_space, grad_norm_sq, gradient_values, inner, laplacian,
    linf_norm, lp_norm, mode_field, project, random_field, sobolev_norm, synthesize
)
from utils.errors import ConfigurationError, DimensionError, UnsupportedDimensionError

from conftest import constant_field


def test_eigenvalues_1d():
    """ lambda table of the unit interval """
    basis = build_basis(DomainSpec.create(1, n_modes=4))
    np.testing.assert_allclose(basis.eigenvalues, np.array([0, 1, 4, 9]) * math.pi ** 2)


def test_eigenvalue_ties_are_lexicographic():
    """ equal eigenvalues are ordered by multi-index """
    basis = build_basis(DomainSpec.create(2, n_modes=(3, 3)))
    assert tuple(basis.mode_index[0]) == (0, 0)
    assert tuple(basis.mode_index[1]) == (0, 1)
    assert tuple(basis.mode_index[2]) == (1, 0)
    assert np.all(np.diff(basis.eigenvalues) >= 0)
    assert basis.flat_index((1, 0)) == 2
    assert basis.flat_index((5, 0)) is None


def test_unsupported_dimension():
    with pytest.raises(UnsupportedDimensionError):
        DomainSpec.create(3)


@pytest.mark.parametrize('dimension, modes', [(1, 8), (2, (4, 5))])
def test_parseval(dimension, modes, rng):
    """ grid quadrature of |u|^2 equals the coefficient sum """
    spec = DomainSpec.create(dimension, n_modes=modes)
    space = get_space(spec)
    c = rng.standard_normal((3, space.n))
    values = space.synthesize_array(c)
    np.testing.assert_allclose(space.integrate(np.sum(values ** 2, axis=0)), np.sum(c ** 2),
                               rtol=1e-12)


@pytest.mark.parametrize('dimension, modes', [(1, 8), (2, (4, 4))])
def test_analyze_inverts_synthesize(dimension, modes, rng):
    spec = DomainSpec.create(dimension, n_modes=modes)
    u = SpectralField(rng.standard_normal((3, spec.n_total)), spec)
    back = analyze(synthesize(u))
    np.testing.assert_allclose(back.coeffs, u.coeffs, atol=1e-12)


def test_analyze_rejects_wrong_grid(spec1d):
    bad = PhysicalField(np.zeros((3, 5)), spec1d)
    with pytest.raises(DimensionError):
        analyze(bad)


def test_gradient_1d(spec1d):
    """ d/dx sqrt(2) cos(pi x) = -sqrt(2) pi sin(pi x) """
    u = mode_field(spec1d, (1,), component=0)
    x = get_space(spec1d).axes_points[0]
    grads = gradient_values(u)
    assert grads.shape == (1, 3, spec1d.quad_points[0])
    np.testing.assert_allclose(grads[0, 0], -math.sqrt(2) * math.pi * np.sin(math.pi * x),
                               atol=1e-12)
    np.testing.assert_allclose(grads[0, 1:], 0.0, atol=1e-14)


def test_gradient_2d(spec2d):
    """ mode (1, 2) on (0,1) x (0,2) is sqrt(2) cos(pi x) cos(pi y) """
    u = mode_field(spec2d, (1, 2), component=2)
    space = get_space(spec2d)
    X, Y = np.meshgrid(space.axes_points[0], space.axes_points[1], indexing='ij')
    grads = gradient_values(u)
    s2 = math.sqrt(2)
    np.testing.assert_allclose(grads[0, 2], -s2 * math.pi * np.sin(math.pi * X) * np.cos(math.pi * Y),
                               atol=1e-12)
    np.testing.assert_allclose(grads[1, 2], -s2 * math.pi * np.cos(math.pi * X) * np.sin(math.pi * Y),
                               atol=1e-12)


@pytest.mark.parametrize('dimension, modes', [(1, 8), (2, (4, 4))])
def test_grad_norm_matches_quadrature(dimension, modes, rng):
    spec = DomainSpec.create(dimension, n_modes=modes)
    space = get_space(spec)
    u = SpectralField(rng.standard_normal((3, space.n)), spec)
    quadrature = space.integrate(np.sum(gradient_values(u) ** 2, axis=(0, 1)))
    np.testing.assert_allclose(grad_norm_sq(u), quadrature, rtol=1e-12)


def test_laplacian_is_diagonal(spec1d, rng):
    u = SpectralField(rng.standard_normal((3, 8)), spec1d)
    lam = get_space(spec1d).eigenvalues
    np.testing.assert_allclose(laplacian(u).coeffs, -lam * u.coeffs)


def test_sobolev_norms(spec1d, rng):
    u = SpectralField(rng.standard_normal((3, 8)), spec1d)
    np.testing.assert_allclose(sobolev_norm(u, 0.0) ** 2, inner(u, u))
    np.testing.assert_allclose(sobolev_norm(u, 0.5) ** 2, inner(u, u) + grad_norm_sq(u))
    with pytest.raises(ConfigurationError):
        sobolev_norm(u, -1.5)


def test_projection_round_trip_and_contraction(spec1d, rng):
    u = SpectralField(rng.standard_normal((3, 8)), spec1d)
    fine = DomainSpec.create(1, n_modes=16)
    coarse = DomainSpec.create(1, n_modes=4)
    np.testing.assert_array_equal(project(project(u, fine), spec1d).coeffs, u.coeffs)
    small = project(u, coarse)
    assert sobolev_norm(small, 0.0) <= sobolev_norm(u, 0.0)
    assert grad_norm_sq(small) <= grad_norm_sq(u)


def test_projection_2d_follows_multi_index(spec2d):
    u = mode_field(spec2d, (1, 3), component=1, amplitude=2.0)
    fine = DomainSpec.create(2, lengths=(1.0, 2.0), n_modes=(6, 6))
    moved = project(u, fine)
    flat = get_space(fine).basis.flat_index((1, 3))
    assert moved.coeffs[1, flat] == 2.0
    assert np.count_nonzero(moved.coeffs) == 1


def test_capacity_check(spec1d):
    space = get_space(spec1d)
    space.check_capacity(3)
    with pytest.raises(ConfigurationError):
        space.check_capacity(5)


def test_norms_of_constant_field(spec1d):
    u = constant_field(spec1d, (1.0, 0.0, 0.0))
    np.testing.assert_allclose(lp_norm(u, 1.5), 1.0, rtol=1e-12)
    np.testing.assert_allclose(lp_norm(u, 4.0), 1.0, rtol=1e-12)
    np.testing.assert_allclose(linf_norm(u), 1.0, rtol=1e-12)


def test_dealiased_pointwise_product(spec1d):
    """ (sqrt(2) cos(pi x))^2 = 1 + cos(2 pi x) projects onto e_0 and e_2 """
    u = mode_field(spec1d, (1,), component=0)
    square = spectral_core.dealiased_pointwise(lambda v: v ** 2, u, degree=2)
    expected = np.zeros(8)
    expected[0] = 1.0
    expected[2] = 1.0 / math.sqrt(2)
    np.testing.assert_allclose(square.coeffs[0], expected, atol=1e-12)


def test_mode_field_outside_truncation(spec1d):
    with pytest.raises(ConfigurationError):
        mode_field(spec1d, (8,), component=0)


def test_random_field_radius(spec2d, rng):
    u = random_field(spec2d, rng, h1_radius=0.7)
    np.testing.assert_allclose(sobolev_norm(u, 0.5), 0.7, rtol=1e-12)
    banded = random_field(spec2d, rng, band=(2, 2))
    outside = np.any(get_space(spec2d).basis.mode_index >= 2, axis=1)
    assert np.all(banded.coeffs[:, outside] == 0.0)


@pytest.mark.parametrize('dimension, modes', [(1, 8), (2, (4, 5))])
def test_projection_is_self_adjoint(dimension, modes, rng):
    """ <Pi v, w> = <v, Pi w> in the quadrature inner product """
    space = get_space(DomainSpec.create(dimension, n_modes=modes))
    shape = (3,) + space.spec.grid_shape
    v, w = rng.standard_normal(shape), rng.standard_normal(shape)
    pv = space.synthesize_array(space.analyze_array(v))
    pw = space.synthesize_array(space.analyze_array(w))
    left = np.sum(space.integrate(pv * w))
    right = np.sum(space.integrate(v * pw))
    np.testing.assert_allclose(left, right, rtol=1e-12)


@pytest.mark.parametrize('dimension, modes', [(1, 8), (2, (4, 5))])
def test_projection_is_idempotent(dimension, modes, rng):
    space = get_space(DomainSpec.create(dimension, n_modes=modes))
    f = rng.standard_normal((3,) + space.spec.grid_shape)
    once = space.analyze_array(f)
    twice = space.analyze_array(space.synthesize_array(once))
    np.testing.assert_allclose(twice, once, atol=1e-13 * np.max(np.abs(once)))


def test_tabulate_reaches_the_boundary(spec1d):
    """ sqrt(2) cos(pi x) peaks at x = 0, its derivative at x = 1/2 """
    space = get_space(spec1d)
    u = mode_field(spec1d, (1,), component=0)
    points = space.closed_axes_points()
    assert points[0][0] == 0.0 and points[0][-1] == 1.0
    values, grads = space.tabulate(u.coeffs, points)
    np.testing.assert_allclose(values[0], math.sqrt(2) * np.cos(math.pi * points[0]), atol=1e-14)
    np.testing.assert_allclose(grads[0, 0], -math.sqrt(2) * math.pi * np.sin(math.pi * points[0]),
                               atol=1e-13)
    np.testing.assert_allclose(values[:, 1:-1], space.synthesize_array(u.coeffs), atol=1e-14)


def test_tabulate_2d_matches_grid_gradients(spec2d, rng):
    space = get_space(spec2d)
    coeffs = rng.standard_normal((3, space.n))
    values, grads = space.tabulate(coeffs, space.axes_points)
    np.testing.assert_allclose(values, space.synthesize_array(coeffs), atol=1e-12)
    np.testing.assert_allclose(grads, space.gradient_array(coeffs), atol=1e-11)
