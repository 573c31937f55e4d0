import numpy as np
import pytest

from homog.errors import ConfigError
from homog.field_specs import constant_spec, expr_spec
from homog.periodic_core import (
    apply_symbol, cell_mean, estimate_alpha, factorize_q0, frequency_grid, gradient_symbol, harmonic_mean,
    make_cubic_lattice, make_field, make_lattice, make_symbol, oscillate, sample_field, steklov_smooth,
    steklov_weights, sup_norm,
)

TWO_PHASE = {'kind': 'piecewise', 'parameters': {'axis': 0, 'breaks': [0.0, 0.5], 'values': [1.0, 3.0]}}


# =============================================================================
# Lattice
# =============================================================================

@pytest.mark.parametrize('d', [1, 2, 3])
def test_cubic_lattice_geometry(d):
    lattice = make_cubic_lattice(d)
    assert lattice.cell_volume == pytest.approx(1.0)
    assert lattice.r0 == pytest.approx(np.pi)
    assert lattice.r1 == pytest.approx(np.sqrt(d) / 2)
    assert lattice.is_unit_cubic


def test_cubic_lattice_rejects_dimension():
    with pytest.raises(ConfigError):
        make_cubic_lattice(4)


def test_general_lattice():
    lattice = make_lattice([[2.0, 0.0], [0.0, 1.0]])
    assert lattice.cell_volume == pytest.approx(2.0)
    # shortest dual vector is 2π/2 along x1
    assert lattice.r0 == pytest.approx(np.pi / 2)
    assert lattice.r1 == pytest.approx(np.sqrt(5) / 2)
    np.testing.assert_allclose(lattice.dual_basis @ lattice.basis.T, 2 * np.pi * np.eye(2))
    with pytest.raises(ConfigError):
        make_lattice([[1.0, 2.0], [2.0, 4.0]])


# =============================================================================
# Fields
# =============================================================================

def test_sample_constant_field():
    field = sample_field(constant_spec(2.0), make_cubic_lattice(1), 8, shape=(1, 1), require_positive=True)
    assert field.positive and field.hermitian
    assert field.eta == pytest.approx(2.0)
    np.testing.assert_allclose(field.values, 2.0)


def test_sample_sine_field_minimum():
    field = sample_field(expr_spec('2 + sin(2*pi*x1)'), make_cubic_lattice(1), 64)
    assert field.eta == pytest.approx(1.0)
    assert np.argmin(field.values.real.ravel()) == 48


def test_sample_field_preconditions():
    lattice = make_cubic_lattice(1)
    with pytest.raises(ConfigError):
        sample_field(constant_spec(1.0), lattice, 7)
    with pytest.raises(ConfigError):
        sample_field(expr_spec('sin(2*pi*x1)'), lattice, 16, require_positive=True)
    with pytest.raises(ConfigError):
        sample_field(expr_spec('1/x1'), lattice, 16)


def test_piecewise_breaks_must_sit_on_grid():
    spec = {'kind': 'piecewise', 'parameters': {'axis': 0, 'breaks': [0.0, 0.3], 'values': [1.0, 3.0]}}
    with pytest.raises(ConfigError):
        sample_field(spec, make_cubic_lattice(1), 16)


def test_means_of_sine_field():
    field = sample_field(expr_spec('2 + sin(2*pi*x1)'), make_cubic_lattice(1), 256)
    assert cell_mean(field)[0, 0].real == pytest.approx(2.0)
    assert harmonic_mean(field)[0, 0].real == pytest.approx(np.sqrt(3), abs=1e-10)


def test_means_of_two_phase_field():
    field = sample_field(TWO_PHASE, make_cubic_lattice(1), 16)
    assert harmonic_mean(field)[0, 0].real == pytest.approx(1.5)
    assert cell_mean(field)[0, 0].real == pytest.approx(2.0)
    assert sup_norm(field) == pytest.approx(3.0)


def test_oscillate_uses_exact_evaluator():
    field = sample_field(expr_spec('2 + sin(2*pi*x1)'), make_cubic_lattice(1), 8)
    x = np.array([[0.013], [0.37]])
    expected = 2 + np.sin(2 * np.pi * x[:, 0] / 0.1)
    np.testing.assert_allclose(oscillate(field, 0.1, x)[:, 0, 0].real, expected)


def test_oscillate_piecewise_lookup_and_interpolation():
    lattice = make_cubic_lattice(1)
    stepped = make_field(sample_field(TWO_PHASE, lattice, 16).values, lattice, piecewise=True)
    x = np.array([[0.024], [0.026], [0.074]])
    np.testing.assert_allclose(oscillate(stepped, 0.05, x)[:, 0, 0].real, [1, 3, 1])

    linear = make_field(np.array([0.0, 1.0, 2.0, 1.0]).reshape(4, 1, 1), lattice)
    np.testing.assert_allclose(oscillate(linear, 1.0, np.array([[0.125], [0.875]]))[:, 0, 0].real, [0.5, 0.5])


def test_oscillate_rejects_nonpositive_epsilon():
    field = sample_field(constant_spec(1.0), make_cubic_lattice(1), 4)
    with pytest.raises(ConfigError):
        oscillate(field, 0.0, [0.5])


# =============================================================================
# Symbol
# =============================================================================

def test_gradient_symbol_constants():
    b = gradient_symbol(2)
    assert (b.m, b.n) == (2, 1)
    assert b.alpha0 == pytest.approx(1.0)
    assert b.alpha1 == pytest.approx(1.0)


def test_rank_deficient_symbol_rejected():
    with pytest.raises(ConfigError):
        make_symbol(np.array([[[1.0]], [[0.0]]]))


def test_frequency_grid_excludes_zero_and_nyquist():
    xi, keep = frequency_grid(8, 1)
    assert not keep[0]
    assert not keep[4]
    assert keep.sum() == 6
    assert xi[1, 0] == pytest.approx(2 * np.pi)


def test_apply_symbol_differentiates_sine():
    lattice = make_cubic_lattice(1)
    field = sample_field(expr_spec('sin(2*pi*x1)'), lattice, 32)
    derivative = apply_symbol(field, gradient_symbol(1))
    y = np.arange(32) / 32
    # D = -i d/dx
    np.testing.assert_allclose(derivative.values[:, 0, 0], -1j * 2 * np.pi * np.cos(2 * np.pi * y), atol=1e-10)


def test_factorize_q0():
    lattice = make_cubic_lattice(1)
    q0 = sample_field(expr_spec('2 + cos(2*pi*x1)'), lattice, 16, require_positive=True)
    f, f0 = factorize_q0(q0)
    product = f.values @ np.conj(np.swapaxes(f.values, -1, -2))
    np.testing.assert_allclose(product[..., 0, 0], 1 / q0.values[..., 0, 0])
    assert f0[0, 0].real == pytest.approx(2 ** -0.5)


# =============================================================================
# Steklov smoothing
# =============================================================================

@pytest.mark.parametrize('half_width', [4.0, 8.0, 5.5])
def test_steklov_weights_sum_to_one(half_width):
    weights = steklov_weights(half_width)
    assert weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(weights, weights[::-1])


def test_steklov_preserves_affine_functions_inside():
    h, eps = 1 / 256, 1 / 16
    x = np.arange(257) * h
    u = (3 * x + 1)[:, None]
    smoothed = steklov_smooth(u, eps, make_cubic_lattice(1), h)
    inner = slice(16, -16)
    np.testing.assert_allclose(smoothed[inner], u[inner], atol=1e-12)


def test_steklov_averages_periodic_mode():
    # averaging over one full period removes the oscillation
    h, eps = 1 / 512, 1 / 8
    x = np.arange(512) * h
    u = np.exp(2j * np.pi * x / eps)
    smoothed = steklov_smooth(u, eps, make_cubic_lattice(1), h, mode='wrap')
    assert np.max(np.abs(smoothed)) < 1e-3


def test_steklov_requires_fine_grid():
    with pytest.raises(ConfigError):
        steklov_smooth(np.zeros(10), 0.1, make_cubic_lattice(1), 0.1)


def _band_limited(rng, n_grid, modes=20):
    k = np.fft.fftfreq(n_grid, d=1 / n_grid)
    spectrum = np.where(np.abs(k) <= modes, rng.normal(size=n_grid) + 1j * rng.normal(size=n_grid), 0)
    return np.fft.ifft(spectrum) * n_grid, k


@pytest.mark.parametrize('seed', range(100))
def test_steklov_does_not_expand(seed):
    rng = np.random.default_rng(seed)
    n_grid, eps = 256, 1 / 8
    u, _ = _band_limited(rng, n_grid)
    if seed % 2:
        u = u + rng.normal(size=n_grid)
    smoothed = steklov_smooth(u, eps, make_cubic_lattice(1), 1 / n_grid, mode='wrap')
    assert np.linalg.norm(smoothed) <= np.linalg.norm(u) * (1 + 1e-12)


def test_steklov_does_not_expand_2d():
    rng = np.random.default_rng(7)
    u = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    smoothed = steklov_smooth(u, 1 / 4, make_cubic_lattice(2), 1 / 64, mode='wrap')
    assert np.linalg.norm(smoothed) <= np.linalg.norm(u) * (1 + 1e-12)


@pytest.mark.parametrize('seed', range(20))
def test_steklov_gap_bounded_by_gradient(seed):
    # ‖S_ε u − u‖ <= ε r₁ ‖u'‖ with r₁ = 1/2 on the unit cell
    rng = np.random.default_rng(seed)
    n_grid, eps = 256, 1 / 8
    u, k = _band_limited(rng, n_grid)
    du = np.fft.ifft(2j * np.pi * k * np.fft.fft(u))
    smoothed = steklov_smooth(u, eps, make_cubic_lattice(1), 1 / n_grid, mode='wrap')
    r1 = make_cubic_lattice(1).r1
    assert np.linalg.norm(smoothed - u) <= 1.1 * eps * r1 * np.linalg.norm(du)


def test_steklov_multiplier_is_sinc_1d():
    n_grid, eps, k = 1024, 1 / 8, 3
    x = np.arange(n_grid) / n_grid
    u = np.exp(2j * np.pi * k * x)
    smoothed = steklov_smooth(u, eps, make_cubic_lattice(1), 1 / n_grid, mode='wrap')
    np.testing.assert_allclose(smoothed, np.sinc(eps * k) * u, atol=1e-4)


def test_steklov_multiplier_is_sinc_2d():
    n_grid, eps = 256, 1 / 4
    x = np.arange(n_grid) / n_grid
    X, Y = np.meshgrid(x, x, indexing='ij')
    u = np.exp(2j * np.pi * (X + 2 * Y))
    smoothed = steklov_smooth(u, eps, make_cubic_lattice(2), 1 / n_grid, mode='wrap')
    np.testing.assert_allclose(smoothed, np.sinc(eps) * np.sinc(2 * eps) * u, atol=1e-3)


def test_steklov_commutes_with_differences():
    rng = np.random.default_rng(3)
    n_grid, eps = 256, 1 / 8
    u = rng.normal(size=n_grid) + 1j * rng.normal(size=n_grid)
    lattice = make_cubic_lattice(1)

    def diff(v):
        return np.roll(v, -1) - v

    np.testing.assert_allclose(steklov_smooth(diff(u), eps, lattice, 1 / n_grid, mode='wrap'),
                               diff(steklov_smooth(u, eps, lattice, 1 / n_grid, mode='wrap')), atol=1e-9)


# =============================================================================
# Symbol constants and mean ordering
# =============================================================================

def test_estimate_alpha_diagonal_symbol():
    b = [[[1.0], [0.0]], [[0.0], [2.0]]]
    alpha0, alpha1 = estimate_alpha(b)
    assert alpha0 == pytest.approx(1.0, abs=1e-12)
    assert alpha1 == pytest.approx(4.0, abs=1e-12)


def test_estimate_alpha_unitary_invariance():
    rng = np.random.default_rng(11)
    b = rng.normal(size=(2, 3, 2)) + 1j * rng.normal(size=(2, 3, 2))
    U, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    rotated = np.einsum('ab,jbn->jan', U, b)
    np.testing.assert_allclose(estimate_alpha(rotated), estimate_alpha(b), rtol=1e-10)


@pytest.mark.parametrize('d', [1, 2])
@pytest.mark.parametrize('seed', range(10))
def test_harmonic_mean_below_cell_mean(random_positive_field, d, seed):
    field = random_positive_field(seed, d=d)
    gap = cell_mean(field) - harmonic_mean(field)
    gap = 0.5 * (gap + np.conj(gap.T))
    assert np.min(np.linalg.eigvalsh(gap)) >= -1e-10
