import numpy as np
import pytest

from homog.bvp_solver import (
    assemble_effective, assemble_oscillating, bottom_eigenvalue, build_mesh, check_zeta, factorize, h1_norm,
    l2_norm, norm_matrices, solve_boundary_layer, solve_resolvent,
)
from homog.cell_solver import solve_cell
from homog.errors import CoercivityError, ConfigError
from homog.model_zoo import build_constant, build_potential_shift, build_scalar_magnetic, build_zero_corrector_case
from homog.periodic_core import inverse_sup_norm
from homog.verify_harness import c_phi, fit_slope, smooth_load, zeta_angle


@pytest.fixture(scope='module')
def constant_effective(constant_problem):
    return solve_cell(constant_problem, 16)[1]


# =============================================================================
# Mesh
# =============================================================================

def test_mesh_counts(unit_mesh_1d, unit_mesh_2d):
    assert unit_mesh_1d.shape == (257,)
    assert len(unit_mesh_1d.boundary_nodes) == 2
    assert unit_mesh_2d.n_nodes == 33 * 33
    assert len(unit_mesh_2d.boundary_nodes) == 4 * 32
    assert unit_mesh_2d.element_nodes().shape == (32 * 32, 4)


@pytest.mark.parametrize('box, h, margin', [
    ([[0.0, 1.0]], 0.3, None),
    ([[0.0, 1.0]], 1 / 64, 1 / 64),
    ([[0.0, 1.0]], 1 / 64, 0.5),
    ([[0.0, 1.0]] * 3, 1 / 8, None),
    ([[1.0, 1.0]], 1 / 8, None),
])
def test_mesh_rejects_bad_input(box, h, margin):
    with pytest.raises(ConfigError):
        build_mesh(box, h, interior_margin=margin)


def test_norms_of_affine_function(unit_mesh_1d):
    mass, laplace = norm_matrices(unit_mesh_1d, 1)
    x = unit_mesh_1d.coords[:, 0]
    assert l2_norm(np.ones_like(x), mass) == pytest.approx(1.0)
    assert h1_norm(x, mass, laplace) == pytest.approx(np.sqrt(1 / 3 + 1))


def test_subdomain_norm():
    mesh = build_mesh([[0.0, 1.0], [0.0, 1.0]], 1 / 32, interior_margin=0.25)
    mass, _ = norm_matrices(mesh, 1, mesh.subdomain)
    assert l2_norm(np.ones(mesh.n_nodes), mass) == pytest.approx(0.5)


# =============================================================================
# Solves
# =============================================================================

def test_check_zeta():
    assert check_zeta(-1) == -1
    assert check_zeta(2 + 1j) == 2 + 1j
    assert check_zeta(3.0, allow_real=True) == 3.0
    with pytest.raises(ConfigError):
        check_zeta(1.0)
    with pytest.raises(ConfigError):
        check_zeta(complex('nan'))


def test_constant_coefficient_solve(unit_mesh_1d, constant_effective):
    # −2u'' + u = sin(πx) with u(0) = u(1) = 0
    system = assemble_effective(unit_mesh_1d, constant_effective)
    x = unit_mesh_1d.coords[:, 0]
    result = solve_resolvent(system, -1.0, np.sin(np.pi * x))
    exact = np.sin(np.pi * x) / (2 * np.pi ** 2 + 1)
    np.testing.assert_allclose(result.u[:, 0], exact, atol=1e-5)
    assert result.residual <= 1e-10
    assert result.u[0, 0] == 0 and result.u[-1, 0] == 0


def test_factorization_is_reused(unit_mesh_1d, constant_effective):
    solver = factorize(assemble_effective(unit_mesh_1d, constant_effective), -1 + 1j)
    x = unit_mesh_1d.coords[:, 0]
    first = solver.solve(np.ones_like(x))
    second = solver.solve(2 * np.ones_like(x))
    np.testing.assert_allclose(second.u, 2 * first.u, atol=1e-12)


def test_load_size_checked(unit_mesh_1d, constant_effective):
    system = assemble_effective(unit_mesh_1d, constant_effective)
    with pytest.raises(ConfigError):
        solve_resolvent(system, -1.0, np.ones(10))


def test_bottom_eigenvalue(unit_mesh_1d, constant_effective):
    system = assemble_effective(unit_mesh_1d, constant_effective)
    assert bottom_eigenvalue(system) == pytest.approx(2 * np.pi ** 2, rel=1e-4)


def test_oscillating_solution_approaches_effective(unit_mesh_1d, sine_problem):
    cell, effective = solve_cell(sine_problem, 256)
    coeffs = sine_problem.sample(256)
    x = unit_mesh_1d.coords[:, 0]
    load = np.sin(np.pi * x)
    u0 = solve_resolvent(assemble_effective(unit_mesh_1d, effective), -1.0, load).u
    osc = assemble_oscillating(unit_mesh_1d, coeffs, sine_problem.symbol(), 1 / 16, effective.lambda_shift)
    u_eps = solve_resolvent(osc, -1.0, load).u
    mass, _ = norm_matrices(unit_mesh_1d, 1)
    assert l2_norm(u_eps - u0, mass) < 0.1 * l2_norm(u0, mass)


def test_oscillating_mesh_resolution(unit_mesh_1d, sine_problem):
    coeffs = sine_problem.sample(64)
    b = sine_problem.symbol()
    with pytest.raises(ConfigError):
        assemble_oscillating(unit_mesh_1d, coeffs, b, 1 / 32, 0.0)
    with pytest.raises(ConfigError):
        assemble_oscillating(unit_mesh_1d, coeffs, b, 0.1, 0.0)


def test_noncoercive_form_rejected(unit_mesh_1d):
    # first Dirichlet eigenvalue π² is below 20
    problem = build_potential_shift(q=-20.0)
    with pytest.raises(CoercivityError):
        assemble_oscillating(unit_mesh_1d, problem.sample(16), problem.symbol(), 1 / 16, 0.0)


def test_boundary_layer_solution(unit_mesh_1d, constant_problem):
    # −2w'' + w = 0 with w = 1 at both ends
    x = unit_mesh_1d.coords[:, 0]
    result = solve_boundary_layer(unit_mesh_1d, constant_problem.sample(16), constant_problem.symbol(),
                                  1 / 16, 0.0, -1.0, np.ones((unit_mesh_1d.n_nodes, 1)))
    exact = np.cosh((x - 0.5) / np.sqrt(2)) / np.cosh(0.5 / np.sqrt(2))
    np.testing.assert_allclose(result.u[:, 0].real, exact, atol=1e-5)
    assert result.kind == 'boundary-layer'


# =============================================================================
# Structure of the discrete forms
# =============================================================================

def _magnetic_system(mesh):
    problem = build_scalar_magnetic(['0.3*sin(2*pi*x1)'], 'cos(2*pi*x1)', '0.5', '2 + sin(2*pi*x1)')
    _, effective = solve_cell(problem, 128)
    return assemble_oscillating(mesh, problem.sample(128), problem.symbol(), 1 / 16, effective.lambda_shift)


def _zero_corrector_system(mesh):
    problem = build_zero_corrector_case(dim=2)
    _, effective = solve_cell(problem, 32)
    return assemble_oscillating(mesh, problem.sample(32), problem.symbol(), 1 / 2, effective.lambda_shift)


def _assert_hermitian(matrix):
    dense = matrix.toarray()
    scale = max(1.0, np.max(np.abs(dense)))
    assert np.max(np.abs(dense - dense.conj().T)) <= 1e-12 * scale


@pytest.mark.parametrize('which', ['magnetic', 'zero-corrector', 'effective'])
def test_forms_are_hermitian(which, unit_mesh_1d, unit_mesh_2d, constant_effective):
    if which == 'magnetic':
        system = _magnetic_system(unit_mesh_1d)
    elif which == 'zero-corrector':
        system = _zero_corrector_system(unit_mesh_2d)
    else:
        system = assemble_effective(unit_mesh_1d, constant_effective)
    _assert_hermitian(system.stiffness)
    _assert_hermitian(system.mass_q0)
    mass_q0 = system.restrict(system.mass_q0).toarray()
    assert np.min(np.linalg.eigvalsh(0.5 * (mass_q0 + mass_q0.conj().T))) > 0


def test_resolvent_is_self_adjoint(unit_mesh_1d):
    # ⟨(B − ζQ₀)⁻¹F, G⟩ = ⟨F, (B − ζ̄Q₀)⁻¹G⟩ in the L² pairing
    system = _magnetic_system(unit_mesh_1d)
    rng = np.random.default_rng(5)
    n_nodes = unit_mesh_1d.n_nodes
    F = rng.normal(size=(n_nodes, 1)) + 1j * rng.normal(size=(n_nodes, 1))
    G = rng.normal(size=(n_nodes, 1)) + 1j * rng.normal(size=(n_nodes, 1))
    zeta = -1 + 2j
    u = solve_resolvent(system, zeta, F).u.reshape(-1)
    v = solve_resolvent(system, np.conj(zeta), G).u.reshape(-1)
    mass = system.mass
    lhs = np.vdot(G.reshape(-1), mass @ u)
    rhs = np.vdot(v, mass @ F.reshape(-1))
    assert lhs == pytest.approx(rhs, rel=1e-9)


# =============================================================================
# A-priori bounds
# =============================================================================

RESOLVENT_ZETAS = [r * np.exp(1j * phi) for r in (1.0, 10.0, 100.0)
                   for phi in (np.pi / 4, np.pi / 2, 3 * np.pi / 4)] + [-1.0]


@pytest.mark.parametrize('epsilon', [1 / 8, 1 / 16])
def test_resolvent_bound(unit_mesh_1d, sine_problem, epsilon):
    # ‖u‖ <= c(φ)|ζ|⁻¹‖Q₀⁻¹‖‖F‖ for the nonnegative form of the sine model
    coeffs = sine_problem.sample(256)
    system = assemble_oscillating(unit_mesh_1d, coeffs, sine_problem.symbol(), epsilon, 0.0)
    mass, _ = norm_matrices(unit_mesh_1d, 1)
    q0_inv = inverse_sup_norm(coeffs.Q0)
    for seed, zeta in enumerate(RESOLVENT_ZETAS):
        F = smooth_load(unit_mesh_1d, 1, seed)
        u = solve_resolvent(system, zeta, F).u
        bound = c_phi(zeta_angle(zeta)) / abs(zeta) * q0_inv * l2_norm(F, mass)
        assert l2_norm(u, mass) <= 1.05 * bound, zeta


def test_gradient_bound(unit_mesh_1d, constant_effective):
    # −2u'' − ζu = F: ‖u'‖ <= c(φ)|ζ|^(-1/2)‖F‖
    system = assemble_effective(unit_mesh_1d, constant_effective)
    mass, laplace = norm_matrices(unit_mesh_1d, 1)
    for seed, zeta in enumerate(RESOLVENT_ZETAS):
        F = smooth_load(unit_mesh_1d, 1, seed)
        u = solve_resolvent(system, zeta, F).u.reshape(-1)
        gradient = np.sqrt(np.real(np.vdot(u, laplace @ u)))
        assert gradient <= c_phi(zeta_angle(zeta)) * abs(zeta) ** -0.5 * l2_norm(F, mass), zeta


# =============================================================================
# Convergence
# =============================================================================

def test_l2_error_is_second_order(constant_effective):
    steps = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    errors = []
    for h in steps:
        mesh = build_mesh([[0.0, 1.0]], h)
        x = mesh.coords[:, 0]
        u = solve_resolvent(assemble_effective(mesh, constant_effective), -1.0, np.sin(np.pi * x)).u[:, 0]
        exact = np.sin(np.pi * x) / (2 * np.pi ** 2 + 1)
        mass, _ = norm_matrices(mesh, 1)
        errors.append(l2_norm(u - exact, mass))
    slope, _ = fit_slope(steps, errors)
    assert slope >= 1.8


def test_manufactured_solution_2d():
    # −2Δu + u = (4π² + 1) sin(πx) sin(πy)
    _, effective = solve_cell(build_constant(2.0, dim=2), 16)
    errors = []
    for h in (1 / 16, 1 / 32):
        mesh = build_mesh([[0.0, 1.0], [0.0, 1.0]], h)
        x, y = mesh.coords[:, 0], mesh.coords[:, 1]
        exact = np.sin(np.pi * x) * np.sin(np.pi * y)
        u = solve_resolvent(assemble_effective(mesh, effective), -1.0, (4 * np.pi ** 2 + 1) * exact).u[:, 0]
        mass, _ = norm_matrices(mesh, 1)
        errors.append(l2_norm(u - exact, mass))
    assert errors[0] / errors[1] >= 3
    assert errors[1] < 5e-3
