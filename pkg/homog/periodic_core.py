"""
Periodic core: lattice geometry, sampled periodic coefficient fields,
the differential symbol b(D) and the Steklov smoothing operator.

Grid convention: a field on the cell is stored at the N^d nodes
y = k/N, k in {0, ..., N-1}^d, in cell (fractional) coordinates, with
wrap-around indexing. Means use the rectangle rule on these nodes.

Usage:
    from homog.periodic_core import make_cubic_lattice, sample_field, cell_mean

    lattice = make_cubic_lattice(1)
    g = sample_field({'kind': 'expr', 'parameters': {'expression': '2 + sin(2*pi*x1)'}},
                     lattice, 256, require_positive=True)
    print(cell_mean(g), harmonic_mean(g))
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from homog.errors import ConfigError
from homog.field_specs import compile_spec

logger = logging.getLogger(__name__)

FLAG_TOL = 1e-12
ALPHA_FLOOR = 1e-12
MAX_DIM = 3


# =============================================================================
# Lattice
# =============================================================================

@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice Γ with basis rows a_j; the cell is the parallelepiped they span."""
    basis: np.ndarray
    cell_volume: float
    r0: float
    r1: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dual_basis(self) -> np.ndarray:
        """Rows b_i with <b_i, a_j> = 2π δ_ij."""
        return 2 * np.pi * np.linalg.inv(self.basis).T

    @property
    def is_unit_cubic(self) -> bool:
        return bool(np.allclose(self.basis, np.eye(self.dim), atol=1e-14))

    def to_cell(self, x: np.ndarray) -> np.ndarray:
        """Physical points (P, d) → fractional cell coordinates in [0, 1)^d."""
        return np.mod(x @ np.linalg.inv(self.basis), 1.0)


def make_lattice(basis) -> Lattice:
    """Build a lattice from d basis vectors (rows), computing |Ω|, r0 and r1."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    d = basis.shape[0]
    if basis.shape != (d, d) or not 1 <= d <= MAX_DIM:
        raise ConfigError(f"Lattice basis must be d×d with 1 <= d <= {MAX_DIM}, got {basis.shape}")
    volume = abs(float(np.linalg.det(basis)))
    if volume < 1e-12:
        raise ConfigError("Lattice basis vectors are linearly dependent")

    dual = 2 * np.pi * np.linalg.inv(basis).T
    shortest = min(
        np.linalg.norm(np.asarray(c, dtype=float) @ dual)
        for c in itertools.product(range(-2, 3), repeat=d) if any(c)
    )
    diameter = max(
        np.linalg.norm(np.asarray(c, dtype=float) @ basis)
        for c in itertools.product((-1, 0, 1), repeat=d)
    )
    return Lattice(basis=basis, cell_volume=volume, r0=shortest / 2, r1=diameter / 2)


def make_cubic_lattice(d: int) -> Lattice:
    """Unit cubic lattice Z^d: |Ω| = 1, r0 = π, r1 = √d / 2."""
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= MAX_DIM:
        raise ConfigError(f"Unsupported dimension {d!r}; expected 1..{MAX_DIM}")
    return make_lattice(np.eye(int(d)))


def require_cubic(lattice: Lattice, what: str) -> None:
    if not lattice.is_unit_cubic:
        raise ConfigError(f"{what} requires the unit cubic lattice")


# =============================================================================
# Periodic fields
# =============================================================================

@dataclass(frozen=True, eq=False)
class PeriodicField:
    """A Γ-periodic matrix field sampled at the N^d cell nodes.

    ``values`` has shape (N,)*d + (rows, cols). ``evaluator`` (optional)
    evaluates the source spec exactly at cell coordinates (P, d).
    """
    values: np.ndarray
    lattice: Lattice
    hermitian: bool = False
    positive: bool = False
    eta: Optional[float] = None
    piecewise: bool = False
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spec: Optional[Dict] = None

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def n_grid(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape[-2], self.values.shape[-1]

    def scaled(self, factor: complex) -> 'PeriodicField':
        values = factor * self.values
        evaluator = None
        if self.evaluator is not None:
            source = self.evaluator
            evaluator = lambda y: factor * source(y)  # noqa: E731
        return make_field(values, self.lattice, piecewise=self.piecewise, evaluator=evaluator)


def grid_points(n_grid: int, d: int) -> np.ndarray:
    """Cell nodes k/N as an array of shape (N,)*d + (d,)."""
    axes = [np.arange(n_grid) / n_grid] * d
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)


def _node_axes(d: int) -> Tuple[int, ...]:
    return tuple(range(d))


def inspect_flags(values: np.ndarray, d: int) -> Tuple[bool, bool, Optional[float]]:
    """Hermitian/positive flags and the smallest eigenvalue η by inspection."""
    if not np.all(np.isfinite(values)):
        raise ConfigError("Field has non-finite values")
    rows, cols = values.shape[-2:]
    if rows != cols:
        return False, False, None
    flat = values.reshape(-1, rows, cols)
    scale = max(1.0, float(np.max(np.abs(flat))))
    hermitian = bool(np.max(np.abs(flat - np.conj(np.swapaxes(flat, -1, -2)))) <= FLAG_TOL * scale)
    if not hermitian:
        return False, False, None
    eta = float(np.min(np.linalg.eigvalsh(flat)))
    return True, eta > 0, eta


def make_field(values: np.ndarray, lattice: Lattice, piecewise: bool = False,
               evaluator: Optional[Callable] = None, spec: Optional[Dict] = None,
               require_positive: bool = False) -> PeriodicField:
    """Wrap nodal values as a PeriodicField with flags computed by inspection."""
    values = np.asarray(values, dtype=complex)
    d = lattice.dim
    if values.ndim != d + 2 or len(set(values.shape[:d])) != 1:
        raise ConfigError(f"Field values must have shape (N,)*{d} + (rows, cols), got {values.shape}")
    hermitian, positive, eta = inspect_flags(values, d)
    if require_positive and not positive:
        raise ConfigError(
            f"Field required to be Hermitian positive; smallest eigenvalue "
            f"{eta if eta is not None else 'undefined'}"
        )
    return PeriodicField(values=values, lattice=lattice, hermitian=hermitian, positive=positive,
                         eta=eta, piecewise=piecewise, evaluator=evaluator, spec=spec)


def sample_field(spec: Dict, lattice: Lattice, n_grid: int,
                 shape: Optional[Sequence[int]] = None,
                 require_positive: bool = False) -> PeriodicField:
    """Sample a field spec at the N^d cell nodes.

    Args:
        spec: JSON-compatible field spec (see homog.field_specs)
        lattice: Lattice the spec is periodic with respect to
        n_grid: Even resolution N >= 4 per axis
        shape: Expected (rows, cols); checked when given
        require_positive: Raise if the sampled field is not Hermitian positive

    Returns:
        PeriodicField carrying the exact evaluator of the spec
    """
    if n_grid < 4 or n_grid % 2:
        raise ConfigError(f"Cell grid N must be even and >= 4, got {n_grid}")
    d = lattice.dim
    compiled = compile_spec(spec, d)
    if shape is not None and tuple(compiled.shape) != tuple(shape):
        raise ConfigError(f"Spec shape {compiled.shape} does not match expected {tuple(shape)}")
    for axis, breaks in compiled.breaks:
        scaled = np.asarray(breaks) * n_grid
        if np.max(np.abs(scaled - np.round(scaled))) > 1e-9:
            raise ConfigError(f"Piecewise breaks {list(breaks)} (axis {axis}) are not on the N={n_grid} grid")
    points = grid_points(n_grid, d).reshape(-1, d)
    values = compiled.evaluate(points).reshape((n_grid,) * d + compiled.shape)
    return make_field(values, lattice, piecewise=compiled.piecewise, evaluator=compiled.evaluate,
                      spec=spec, require_positive=require_positive)


def hermitize(field: PeriodicField) -> PeriodicField:
    """Replace values by their Hermitian part (Q must be Hermitian)."""
    values = 0.5 * (field.values + np.conj(np.swapaxes(field.values, -1, -2)))
    evaluator = None
    if field.evaluator is not None:
        source = field.evaluator
        evaluator = lambda y: 0.5 * (source(y) + np.conj(np.swapaxes(source(y), -1, -2)))  # noqa: E731
    return make_field(values, field.lattice, piecewise=field.piecewise, evaluator=evaluator,
                      spec=field.spec)


def cell_mean(field: PeriodicField) -> np.ndarray:
    """Mean over the cell (rectangle rule on the periodic grid)."""
    return field.values.mean(axis=_node_axes(field.dim))


def harmonic_mean(field: PeriodicField) -> np.ndarray:
    """Inverse of the cell mean of the pointwise inverse."""
    rows, cols = field.shape
    if rows != cols:
        raise ConfigError(f"Harmonic mean needs a square field, got {field.shape}")
    flat = field.values.reshape(-1, rows, cols)
    try:
        inverse = np.linalg.inv(flat)
    except np.linalg.LinAlgError as exc:
        raise ConfigError("Field is singular at some node") from exc
    if not np.all(np.isfinite(inverse)):
        raise ConfigError("Field is singular at some node")
    return np.linalg.inv(inverse.mean(axis=0))


def sup_norm(field: PeriodicField) -> float:
    """max over nodes of the spectral norm."""
    return float(np.max(np.linalg.norm(field.values.reshape((-1,) + field.shape), ord=2, axis=(1, 2))))


def inverse_sup_norm(field: PeriodicField) -> float:
    """‖h⁻¹‖_∞ for a square field."""
    flat = field.values.reshape((-1,) + field.shape)
    return float(np.max(np.linalg.norm(np.linalg.inv(flat), ord=2, axis=(1, 2))))


def _interpolate_grid(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Multilinear periodic interpolation of nodal values at cell coordinates y (P, d)."""
    d = y.shape[1]
    n_grid = values.shape[0]
    coords = (y * n_grid).T
    rows, cols = values.shape[-2:]
    out = np.empty((y.shape[0], rows, cols), dtype=complex)
    for r in range(rows):
        for c in range(cols):
            entry = values[(Ellipsis, r, c)]
            real = ndimage.map_coordinates(entry.real, coords, order=1, mode='grid-wrap')
            imag = ndimage.map_coordinates(entry.imag, coords, order=1, mode='grid-wrap')
            out[:, r, c] = real + 1j * imag
    return out


def _lookup_grid(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Value of the node whose grid cell contains y (exact for jumps on grid lines)."""
    n_grid = values.shape[0]
    index = np.mod(np.floor(y * n_grid + 1e-9).astype(int), n_grid)
    return values[tuple(index.T)]


def oscillate(field: PeriodicField, epsilon: float, x) -> np.ndarray:
    """Evaluate h^ε(x) = h(x/ε).

    ``x`` is one point (d,) or an array of points (P, d); the result is a
    matrix or an array (P, rows, cols).
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = np.atleast_2d(x).reshape(-1, field.dim)
    y = field.lattice.to_cell(points / epsilon)
    if field.evaluator is not None:
        out = field.evaluator(y)
    elif field.piecewise:
        out = _lookup_grid(field.values, y)
    else:
        out = _interpolate_grid(field.values, y)
    return out[0] if single else out


# =============================================================================
# Differential symbol b(D)
# =============================================================================

@dataclass(frozen=True, eq=False)
class SymbolB:
    """b(D) = Σ_j b_j D_j with constant m×n matrices b_j (stacked (d, m, n))."""
    b_matrices: np.ndarray
    alpha0: float
    alpha1: float

    @property
    def dim(self) -> int:
        return self.b_matrices.shape[0]

    @property
    def m(self) -> int:
        return self.b_matrices.shape[1]

    @property
    def n(self) -> int:
        return self.b_matrices.shape[2]

    def symbol(self, xi: np.ndarray) -> np.ndarray:
        """b(ξ) for ξ of shape (..., d) → (..., m, n)."""
        return np.einsum('...j,jmn->...mn', np.asarray(xi, dtype=float), self.b_matrices)


def unit_directions(d: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0]])
    if d == 2:
        angles = np.deg2rad(np.arange(360))
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    polar = np.deg2rad(np.arange(0, 181, 5))
    azimuth = np.deg2rad(np.arange(0, 360, 5))
    t, p = np.meshgrid(polar, azimuth, indexing='ij')
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1).reshape(-1, 3)


def estimate_alpha(b_matrices) -> Tuple[float, float]:
    """Extreme eigenvalues of b(θ)*b(θ) over sampled unit directions θ."""
    b = np.asarray(b_matrices, dtype=complex)
    if b.ndim != 3 or b.shape[1] < b.shape[2]:
        raise ConfigError(f"b matrices must be stacked (d, m, n) with m >= n, got {b.shape}")
    theta = unit_directions(b.shape[0])
    b_theta = np.einsum('pj,jmn->pmn', theta, b)
    gram = np.conj(np.swapaxes(b_theta, -1, -2)) @ b_theta
    eigs = np.linalg.eigvalsh(gram)
    alpha0, alpha1 = float(eigs.min()), float(eigs.max())
    if alpha0 <= ALPHA_FLOOR:
        raise ConfigError(f"Symbol b(θ) loses rank (alpha0 = {alpha0:.3e})")
    return alpha0, alpha1


def make_symbol(b_matrices) -> SymbolB:
    b = np.asarray(b_matrices, dtype=complex)
    alpha0, alpha1 = estimate_alpha(b)
    return SymbolB(b_matrices=b, alpha0=alpha0, alpha1=alpha1)


def gradient_symbol(d: int) -> SymbolB:
    """b(D) = D: n = 1, m = d, b_j = e_j."""
    return make_symbol(np.eye(d).reshape(d, d, 1))


# =============================================================================
# Spectral helpers on the cell grid
# =============================================================================

def frequency_grid(n_grid: int, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Angular frequencies ξ = 2πk (shape (N,)*d + (d,)) and the mask of
    modes kept in the zero-mean trial space (no zero mode, no Nyquist component)."""
    k = np.fft.fftfreq(n_grid, d=1.0 / n_grid)
    nyquist = np.isclose(np.abs(k), n_grid / 2)
    k = np.where(nyquist, 0.0, k)
    grids = np.meshgrid(*([k] * d), indexing='ij')
    nyq = np.meshgrid(*([nyquist] * d), indexing='ij')
    xi = 2 * np.pi * np.stack(grids, axis=-1)
    keep = ~np.logical_or.reduce(nyq)
    keep[(0,) * d] = False
    return xi, keep


def fft_field(values: np.ndarray, d: int) -> np.ndarray:
    return np.fft.fftn(values, axes=_node_axes(d))


def ifft_field(values: np.ndarray, d: int) -> np.ndarray:
    return np.fft.ifftn(values, axes=_node_axes(d))


def apply_symbol_values(values: np.ndarray, b: SymbolB) -> np.ndarray:
    """Spectral b(D)U for nodal values U of shape (N,)*d + (n, c)."""
    d = b.dim
    xi, _ = frequency_grid(values.shape[0], d)
    u_hat = fft_field(values, d)
    return ifft_field(b.symbol(xi) @ u_hat, d)


def apply_symbol(field: PeriodicField, b: SymbolB, piecewise: Optional[bool] = None) -> PeriodicField:
    """b(D) applied to a periodic field (spectral differentiation)."""
    require_cubic(field.lattice, "Spectral differentiation")
    values = apply_symbol_values(field.values, b)
    return make_field(values, field.lattice,
                      piecewise=field.piecewise if piecewise is None else piecewise)


def factorize_q0(q0: PeriodicField) -> Tuple[PeriodicField, np.ndarray]:
    """f = Q₀^{-1/2} pointwise (so Q₀⁻¹ = f f*) and f₀ = Q̄₀^{-1/2}."""
    if not q0.positive:
        raise ConfigError("Q0 must be Hermitian positive")

    def inverse_sqrt(mats):
        evals, evecs = np.linalg.eigh(mats)
        return (evecs * evals[..., None, :] ** -0.5) @ np.conj(np.swapaxes(evecs, -1, -2))

    f = make_field(inverse_sqrt(q0.values), q0.lattice, piecewise=q0.piecewise)
    return f, inverse_sqrt(cell_mean(q0))


# =============================================================================
# Steklov smoothing
# =============================================================================

def _hat_integral(t: np.ndarray) -> np.ndarray:
    """Antiderivative of the unit hat function supported on [-1, 1]."""
    t = np.clip(t, -1.0, 1.0)
    return np.where(t <= 0, 0.5 * (t + 1) ** 2, 1 - 0.5 * (1 - t) ** 2)


def steklov_weights(half_width: float) -> np.ndarray:
    """Node weights averaging the piecewise-linear interpolant over
    [-half_width, half_width] (grid units); trapezoid rule for integer widths."""
    reach = int(np.ceil(half_width)) + 1
    offsets = np.arange(-reach, reach + 1, dtype=float)
    weights = (_hat_integral(half_width - offsets) - _hat_integral(-half_width - offsets)) / (2 * half_width)
    support = np.nonzero(weights > 0)[0]
    return weights[support[0]:support[-1] + 1]


def steklov_smooth(u: np.ndarray, epsilon: float, lattice: Lattice, h: float,
                   mode: str = 'nearest') -> np.ndarray:
    """(S_ε u)(x) = |Ω|⁻¹ ∫_Ω u(x − εz) dz on a uniform box grid.

    Args:
        u: Values of shape (n1, ..., nd, *components) with spacing h
        epsilon: Smoothing scale
        lattice: Unit cubic lattice (cell = unit cube)
        h: Grid spacing; must satisfy h <= epsilon / 8
        mode: Boundary handling of scipy.ndimage ('wrap' for periodic data,
            'nearest' when the caller extended u beyond the region of interest)

    Returns:
        Smoothed values, same shape as u
    """
    require_cubic(lattice, "Steklov smoothing")
    if h > epsilon / 8 * (1 + 1e-12):
        raise ConfigError(f"Grid too coarse for smoothing: h={h:.4g} > epsilon/8={epsilon / 8:.4g}")
    weights = steklov_weights(epsilon / (2 * h))
    out = np.asarray(u, dtype=complex)
    for axis in range(lattice.dim):
        real = ndimage.convolve1d(out.real, weights, axis=axis, mode=mode)
        imag = ndimage.convolve1d(out.imag, weights, axis=axis, mode=mode)
        out = real + 1j * imag
    return out


# =============================================================================
# Coefficient bundle
# =============================================================================

@dataclass(frozen=True, eq=False)
class Coefficients:
    """Sampled coefficients of B_ε: g (m×m), a_j (n×n each), Q, Q0 (n×n)."""
    g: PeriodicField
    a: Tuple[PeriodicField, ...]
    Q: PeriodicField
    Q0: PeriodicField

    @property
    def lattice(self) -> Lattice:
        return self.g.lattice

    @property
    def n(self) -> int:
        return self.Q0.shape[0]
