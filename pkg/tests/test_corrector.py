import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid, trapezoid

from homog.bvp_solver import build_mesh, l2_norm, norm_matrices
from homog.cell_solver import solve_cell
from homog.corrector import (
    boundary_corrector_trace, boundary_cutoff, corrector_no_smoothing, extend, extension_pad, first_order_approx,
    flux_approx, zeroth_order_approx,
)
from homog.errors import ConfigError

EPS = 1 / 16


@pytest.fixture(scope='module')
def constant_cell(constant_problem):
    return solve_cell(constant_problem, 16)[0]


@pytest.fixture(scope='module')
def sine_cell(sine_problem):
    return solve_cell(sine_problem, 256)[0]


def _affine(mesh):
    return 3 * mesh.coords[:, 0] + 1


# =============================================================================
# Extension
# =============================================================================

def test_extension_pad(unit_mesh_1d):
    # ε r₁ = 1/32 is 8 steps, plus two
    assert extension_pad(unit_mesh_1d, EPS, 0.5) == 10


def test_extension_keeps_data_and_affine_functions(unit_mesh_1d):
    u0 = _affine(unit_mesh_1d)
    ext = extend(u0, unit_mesh_1d, EPS, 0.5)
    np.testing.assert_allclose(ext.restrict()[:, 0], u0)
    x_ext = ext.lower[0] + ext.h * np.arange(ext.values.shape[0])
    np.testing.assert_allclose(ext.values[:, 0].real, 3 * x_ext + 1, atol=1e-12)
    assert ext.rule == 'c1-reflection'


def test_extension_in_two_dimensions(unit_mesh_2d):
    coords = unit_mesh_2d.coords
    u0 = coords[:, 0] * coords[:, 1]
    ext = extend(u0, unit_mesh_2d, 1 / 4, np.sqrt(2) / 2)
    np.testing.assert_allclose(ext.restrict()[..., 0].ravel(), u0)
    assert ext.c_ext >= 1.0


def test_extension_rejects_large_epsilon():
    mesh = build_mesh([[0.0, 1.0]], 1 / 32)
    with pytest.raises(ConfigError):
        extend(np.zeros(mesh.n_nodes), mesh, 1.0, 0.5)


# =============================================================================
# Approximations
# =============================================================================

def test_constant_coefficient_has_no_corrector(unit_mesh_1d, constant_cell):
    u0 = _affine(unit_mesh_1d)
    out = first_order_approx(u0, constant_cell, EPS, unit_mesh_1d)
    np.testing.assert_allclose(out.v_eps[:, 0], u0, atol=1e-12)
    np.testing.assert_allclose(out.w_trace, 0.0, atol=1e-12)
    # flux is g b(D)u₀ = 2 · (−i · 3)
    np.testing.assert_allclose(out.flux, -6j, atol=1e-10)


def test_smoothing_is_transparent_for_affine_data(unit_mesh_1d, sine_cell):
    u0 = _affine(unit_mesh_1d)
    smoothed = first_order_approx(u0, sine_cell, EPS, unit_mesh_1d, zeta=-1)
    plain = corrector_no_smoothing(u0, sine_cell, EPS, unit_mesh_1d, zeta=-1)
    np.testing.assert_allclose(smoothed.v_eps, plain.v_eps, atol=1e-10)
    np.testing.assert_allclose(smoothed.flux, plain.flux, atol=1e-8)
    assert smoothed.smoothing and not plain.smoothing


def test_smoothed_flux_matches_first_order_output(unit_mesh_1d, sine_cell):
    u0 = np.sin(np.pi * unit_mesh_1d.coords[:, 0])
    out = first_order_approx(u0, sine_cell, EPS, unit_mesh_1d)
    np.testing.assert_allclose(flux_approx(u0, sine_cell, EPS, unit_mesh_1d), out.flux)
    assert out.flux.shape == (unit_mesh_1d.n_elements, 2, 1)


def test_trace_lives_on_boundary(unit_mesh_1d, sine_cell):
    u0 = _affine(unit_mesh_1d)
    out = first_order_approx(u0, sine_cell, EPS, unit_mesh_1d)
    inner = unit_mesh_1d.interior_nodes
    boundary = unit_mesh_1d.boundary_nodes
    assert np.all(out.w_trace[inner] == 0)
    np.testing.assert_allclose(out.w_trace[boundary], out.K_term[boundary])


def test_zeroth_order_flux(unit_mesh_1d, sine_cell):
    u0 = _affine(unit_mesh_1d)
    out = zeroth_order_approx(u0, sine_cell, EPS, unit_mesh_1d)
    np.testing.assert_allclose(out.v_eps[:, 0], u0)
    np.testing.assert_allclose(out.flux, -3j * sine_cell.g0[0, 0], atol=1e-10)


# =============================================================================
# Boundary cutoff
# =============================================================================

def test_boundary_cutoff(unit_mesh_1d):
    theta, mu = boundary_cutoff(unit_mesh_1d, EPS)
    x = unit_mesh_1d.coords[:, 0]
    assert theta[0] == 1.0 and theta[-1] == 1.0
    assert np.all(theta[(x >= EPS / 2) & (x <= 1 - EPS / 2)] == 0.0)
    assert np.all((theta >= 0) & (theta <= 1))
    # smootherstep slope peaks at 15/8 over a strip of width ε/2
    assert 3.0 < mu <= 3.75 + 1e-9


def test_boundary_cutoff_needs_resolved_strip(unit_mesh_1d):
    with pytest.raises(ConfigError):
        boundary_cutoff(unit_mesh_1d, 1 / 64)


def test_cutoff_corrector_matches_trace(unit_mesh_1d, sine_cell):
    u0 = _affine(unit_mesh_1d)
    phi, theta, _ = boundary_corrector_trace(u0, sine_cell, EPS, unit_mesh_1d)
    out = first_order_approx(u0, sine_cell, EPS, unit_mesh_1d)
    boundary = unit_mesh_1d.boundary_nodes
    np.testing.assert_allclose(phi[boundary], out.w_trace[boundary])
    assert np.all(phi[theta == 0] == 0)


def test_cutoff_corrector_reuses_first_order_term(unit_mesh_1d, sine_cell):
    u0 = np.sin(np.pi * unit_mesh_1d.coords[:, 0])
    out = first_order_approx(u0, sine_cell, EPS, unit_mesh_1d)
    reused, theta, mu = boundary_corrector_trace(u0, sine_cell, EPS, unit_mesh_1d, corrector=out)
    fresh, _, fresh_mu = boundary_corrector_trace(u0, sine_cell, EPS, unit_mesh_1d)
    np.testing.assert_allclose(reused, fresh, atol=1e-14)
    np.testing.assert_allclose(reused, theta[:, None] * out.K_term)
    assert mu == fresh_mu


def test_cutoff_corrector_rejects_other_epsilon(unit_mesh_1d, sine_cell):
    u0 = _affine(unit_mesh_1d)
    out = first_order_approx(u0, sine_cell, 1 / 8, unit_mesh_1d)
    with pytest.raises(ConfigError):
        boundary_corrector_trace(u0, sine_cell, EPS, unit_mesh_1d, corrector=out)


# =============================================================================
# Linearity and two-scale structure
# =============================================================================

def test_approximations_are_linear(unit_mesh_1d, sine_cell):
    x = unit_mesh_1d.coords[:, 0]
    u, w = np.sin(np.pi * x), x * (1 - x) + 0.2j * x
    c1, c2 = 1 + 2j, -0.5j
    for build in (first_order_approx, corrector_no_smoothing):
        combined = build(c1 * u + c2 * w, sine_cell, EPS, unit_mesh_1d)
        first = build(u, sine_cell, EPS, unit_mesh_1d)
        second = build(w, sine_cell, EPS, unit_mesh_1d)
        np.testing.assert_allclose(combined.v_eps, c1 * first.v_eps + c2 * second.v_eps, atol=1e-10)
        np.testing.assert_allclose(combined.K_term, c1 * first.K_term + c2 * second.K_term, atol=1e-10)
        np.testing.assert_allclose(combined.flux, c1 * first.flux + c2 * second.flux, atol=1e-10)


def _sine_corrector_profile():
    # Λ = iΛ_r with Λ_r' = √3/(2 + sin 2πy) − 1 and zero mean
    y = np.linspace(0.0, 1.0, 20001)
    profile = cumulative_trapezoid(np.sqrt(3) / (2 + np.sin(2 * np.pi * y)) - 1, y, initial=0.0)
    profile -= trapezoid(profile, y)
    return lambda t: np.interp(np.mod(t, 1.0), y, profile)


@pytest.mark.parametrize('build', [corrector_no_smoothing, first_order_approx])
def test_two_scale_form_in_one_dimension(unit_mesh_1d, sine_cell, build):
    # ε Λ(x/ε) b(D)u₀ = ε Λ_r(x/ε) u₀' for b(D) = D
    x = unit_mesh_1d.coords[:, 0]
    out = build(np.sin(np.pi * x), sine_cell, EPS, unit_mesh_1d)
    expected = EPS * _sine_corrector_profile()(x / EPS) * np.pi * np.cos(np.pi * x)
    inner = (x >= 0.125) & (x <= 0.875)
    np.testing.assert_allclose(out.K_term[inner, 0], expected[inner], atol=EPS ** 2)


def test_first_order_gap_bounded_by_extension_norm(unit_mesh_1d, sine_cell):
    # ‖v_ε − u₀‖ <= ε (M₁² α₁ + M̃₁²)^(1/2) ‖ũ₀‖_H¹ with α₁ = 1, M̃₁ = 0
    x = unit_mesh_1d.coords[:, 0]
    u0 = np.sin(np.pi * x)
    out = first_order_approx(u0, sine_cell, EPS, unit_mesh_1d)
    mass, _ = norm_matrices(unit_mesh_1d, 1)
    m1 = np.sqrt(np.mean(np.abs(sine_cell.lam.values) ** 2))
    ext = extend(u0, unit_mesh_1d, EPS, 0.5)
    values = ext.values[:, 0]
    derivative = np.gradient(values, ext.h, edge_order=2)
    h1 = np.sqrt(ext.h * np.sum(np.abs(values) ** 2 + np.abs(derivative) ** 2))
    assert l2_norm(out.v_eps - u0[:, None], mass) <= 1.1 * EPS * m1 * h1


def test_cutoff_corrector_needs_smoothed_output(unit_mesh_1d, sine_cell):
    u0 = _affine(unit_mesh_1d)
    plain = corrector_no_smoothing(u0, sine_cell, EPS, unit_mesh_1d)
    with pytest.raises(ConfigError):
        boundary_corrector_trace(u0, sine_cell, EPS, unit_mesh_1d, corrector=plain)
