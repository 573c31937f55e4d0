"""
Cell solver: the two periodic cell problems, the effective matrix, the
lower-order effective coefficients V and W, the coercivity shift λ and
the effective operator B⁰ with its symbol L(ξ).

Cell problems are solved by trigonometric Galerkin on the cell grid. The
unknowns are the Fourier coefficients of the solution without the zero
mode (zero mean) and without Nyquist modes; products with g are taken
pointwise at the nodes. The frequency-coupled system is solved by
conjugate gradients preconditioned with the constant-coefficient symbol
b(ξ)* ḡ b(ξ); small grids fall back to a dense solve.

Usage:
    from homog.cell_solver import solve_lambda, assemble_g_tilde, effective_matrix

    lam, residual = solve_lambda(g, b)
    g0 = effective_matrix(assemble_g_tilde(g, lam, b), g=g)
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse.linalg as spla

from homog.errors import CoercivityError, ConfigError, SolverError
from homog.periodic_core import (
    Coefficients, Lattice, PeriodicField, SymbolB, apply_symbol_values, cell_mean, fft_field,
    frequency_grid, harmonic_mean, ifft_field, inverse_sup_norm, make_field,
    require_cubic, sup_norm, unit_directions,
)

logger = logging.getLogger(__name__)

CELL_TOL = 1e-10
CG_TOL = 1e-12
CG_MAXITER = 2000
VOIGT_REUSS_TOL = 1e-8
DENSE_LIMITS = {1: 128, 2: 64}
LAMBDA_SEARCH_CAP = 2.0 ** 64
LAMBDA_TEST_MODES = {1: 16, 2: 4, 3: 2}
LAMBDA_SCALES = (1.0, 0.5, 0.25)


@dataclass(frozen=True, eq=False)
class CellSolution:
    """Everything the effective operator and the correctors need from the cell."""
    lam: PeriodicField
    lam_tilde: PeriodicField
    g_tilde: PeriodicField
    g0: np.ndarray
    V: np.ndarray
    W: np.ndarray
    residuals: Tuple[float, float]
    b_lam: PeriodicField
    b_lam_tilde: PeriodicField
    g: PeriodicField
    symbol: SymbolB

    @property
    def n_grid(self) -> int:
        return self.g.n_grid

    @property
    def is_zero_corrector(self) -> bool:
        return bool(np.max(np.abs(self.lam.values)) <= 1e-10
                    and np.max(np.abs(self.lam_tilde.values)) <= 1e-10)


@dataclass(frozen=True, eq=False)
class EffectiveOperator:
    """Constant coefficients of B⁰ and the symbol L(ξ)."""
    g0: np.ndarray
    V: np.ndarray
    W: np.ndarray
    a_mean: np.ndarray
    Q_mean: np.ndarray
    Q0_mean: np.ndarray
    lambda_shift: float
    symbol_b: SymbolB
    c_star: float
    c_star_bound: float
    C_L: float

    @property
    def n(self) -> int:
        return self.Q0_mean.shape[0]

    def symbol(self, xi) -> np.ndarray:
        """L(ξ) for ξ of shape (..., d) → (..., n, n)."""
        xi = np.asarray(xi, dtype=float)
        bxi = self.symbol_b.symbol(xi)
        bxi_h = np.conj(np.swapaxes(bxi, -1, -2))
        v_h = np.conj(self.V.T)
        out = bxi_h @ self.g0 @ bxi - bxi_h @ self.V - v_h @ bxi
        out = out + np.einsum('...j,jab->...ab', xi, self.a_mean)
        return out + self.Q_mean - self.W + self.lambda_shift * self.Q0_mean


# =============================================================================
# Frequency-coupled cell operator
# =============================================================================

def _hermitian_part(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + np.conj(np.swapaxes(mat, -1, -2)))


def _check_coefficient(g: PeriodicField, b: SymbolB) -> None:
    require_cubic(g.lattice, "Cell problems")
    if g.shape != (b.m, b.m):
        raise ConfigError(f"g has shape {g.shape}, symbol needs ({b.m}, {b.m})")
    if g.dim != b.dim:
        raise ConfigError(f"g lives in d={g.dim}, symbol in d={b.dim}")
    if not g.positive:
        raise CoercivityError("g is not Hermitian positive definite; the cell operator is not coercive")


class _CellOperator:
    """U ↦ b(D)* g b(D) U on the kept Fourier modes, one column at a time."""

    def __init__(self, g: PeriodicField, b: SymbolB):
        self.g_values = g.values
        self.d = b.dim
        self.n = b.n
        n_grid = g.n_grid
        self.grid_shape = (n_grid,) * self.d
        xi, self.keep = frequency_grid(n_grid, self.d)
        self.bxi = b.symbol(xi)
        self.bxi_h = np.conj(np.swapaxes(self.bxi, -1, -2))
        self.size = int(self.keep.sum()) * self.n

        g_ref = cell_mean(g)
        blocks = self.bxi_h[self.keep] @ g_ref @ self.bxi[self.keep]
        try:
            self.precond_blocks = np.linalg.inv(blocks)
        except np.linalg.LinAlgError as exc:
            raise CoercivityError("Constant-coefficient symbol is singular at some frequency") from exc

    def _scatter(self, x: np.ndarray) -> np.ndarray:
        u_hat = np.zeros(self.grid_shape + (self.n,), dtype=complex)
        u_hat[self.keep] = x.reshape(-1, self.n)
        return u_hat

    def matvec(self, x: np.ndarray) -> np.ndarray:
        u_hat = self._scatter(np.asarray(x).ravel())
        grad = ifft_field((self.bxi @ u_hat[..., None])[..., 0], self.d)
        flux = (self.g_values @ grad[..., None])[..., 0]
        out = (self.bxi_h @ fft_field(flux, self.d)[..., None])[..., 0]
        return out[self.keep].ravel()

    def precondition(self, x: np.ndarray) -> np.ndarray:
        r = np.asarray(x).ravel().reshape(-1, self.n, 1)
        return (self.precond_blocks @ r).ravel()

    def linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.size, self.size), matvec=self.matvec, dtype=complex)

    def preconditioner(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.size, self.size), matvec=self.precondition, dtype=complex)

    def dense(self) -> np.ndarray:
        eye = np.eye(self.size, dtype=complex)
        return np.stack([self.matvec(eye[:, i]) for i in range(self.size)], axis=1)


def _solve_column(op: _CellOperator, rhs: np.ndarray, label: str) -> Tuple[np.ndarray, float]:
    norm_rhs = np.linalg.norm(rhs)
    if norm_rhs == 0.0:
        return np.zeros_like(rhs), 0.0

    iterations = [0]

    def count(_):
        iterations[0] += 1

    x, info = spla.cg(op.linear_operator(), rhs, M=op.preconditioner(), rtol=CG_TOL, atol=0.0,
                      maxiter=CG_MAXITER, callback=count)
    residual = np.linalg.norm(op.matvec(x) - rhs) / norm_rhs
    logger.debug("%s: cg info=%d after %d iterations, residual %.2e", label, info, iterations[0], residual)

    limit = DENSE_LIMITS.get(op.d, 0)
    if (info != 0 or residual > CELL_TOL) and op.grid_shape[0] <= limit:
        logger.info("%s: cg did not reach tolerance (%.2e), dense fallback", label, residual)
        try:
            x = np.linalg.solve(op.dense(), rhs)
        except np.linalg.LinAlgError as exc:
            raise CoercivityError(f"{label}: cell system is singular") from exc
        residual = np.linalg.norm(op.matvec(x) - rhs) / norm_rhs

    if residual > CELL_TOL:
        raise SolverError(f"{label}: cell solve residual {residual:.2e} exceeds {CELL_TOL:.0e}")
    return x, float(residual)


def _solve_cell_system(g: PeriodicField, b: SymbolB, rhs_hat: np.ndarray,
                       label: str) -> Tuple[np.ndarray, float]:
    """Solve b(D)* g b(D) U = rhs column by column; rhs_hat has shape grid + (n, c)."""
    op = _CellOperator(g, b)
    cols = rhs_hat.shape[-1]
    u_hat = np.zeros(rhs_hat.shape, dtype=complex)
    worst = 0.0
    for c in range(cols):
        x, residual = _solve_column(op, rhs_hat[..., c][op.keep].ravel(), f"{label}[:, {c}]")
        u_hat[..., c] = op._scatter(x)
        worst = max(worst, residual)
    return ifft_field(u_hat, b.dim), worst


# =============================================================================
# Cell problems
# =============================================================================

def solve_lambda(g: PeriodicField, b: SymbolB) -> Tuple[PeriodicField, float]:
    """Zero-mean n×m Λ with b(D)* g (b(D)Λ + 1_m) = 0.

    Returns:
        (Λ, relative residual)
    """
    _check_coefficient(g, b)
    d = b.dim
    xi, _ = frequency_grid(g.n_grid, d)
    bxi_h = np.conj(np.swapaxes(b.symbol(xi), -1, -2))
    rhs_hat = -(bxi_h @ fft_field(g.values, d))
    values, residual = _solve_cell_system(g, b, rhs_hat, "Lambda")
    return make_field(values, g.lattice), residual


def solve_lambda_tilde(g: PeriodicField, b: SymbolB,
                       a: Sequence[PeriodicField]) -> Tuple[PeriodicField, float]:
    """Zero-mean n×n Λ̃ with b(D)* g b(D)Λ̃ + Σ_j D_j a_j* = 0.

    Returns:
        (Λ̃, relative residual)
    """
    _check_coefficient(g, b)
    d = b.dim
    if len(a) != d:
        raise ConfigError(f"Expected {d} fields a_j, got {len(a)}")
    for j, a_j in enumerate(a):
        if a_j.shape != (b.n, b.n):
            raise ConfigError(f"a_{j + 1} has shape {a_j.shape}, expected ({b.n}, {b.n})")
    xi, _ = frequency_grid(g.n_grid, d)
    rhs_hat = np.zeros((g.n_grid,) * d + (b.n, b.n), dtype=complex)
    for j, a_j in enumerate(a):
        a_adj = np.conj(np.swapaxes(a_j.values, -1, -2))
        rhs_hat -= xi[..., j, None, None] * fft_field(a_adj, d)
    values, residual = _solve_cell_system(g, b, rhs_hat, "Lambda_tilde")
    return make_field(values, g.lattice), residual


def assemble_g_tilde(g: PeriodicField, lam: PeriodicField, b: SymbolB) -> PeriodicField:
    """g̃ = g (b(D)Λ + 1_m)."""
    b_lam = apply_symbol_values(lam.values, b)
    values = g.values @ (b_lam + np.eye(b.m))
    return make_field(values, g.lattice, piecewise=g.piecewise)


def effective_matrix(g_tilde: PeriodicField, g: Optional[PeriodicField] = None) -> np.ndarray:
    """g⁰ = mean of g̃; checked for Hermitian positivity and, when g is
    given, for the Voigt–Reuss bracket harmonic_mean(g) <= g⁰ <= mean(g)."""
    g0 = cell_mean(g_tilde)
    scale = max(1.0, float(np.max(np.abs(g0))))
    asymmetry = float(np.max(np.abs(g0 - np.conj(g0.T))))
    if asymmetry > VOIGT_REUSS_TOL * scale:
        raise SolverError(f"Effective matrix is not Hermitian (asymmetry {asymmetry:.2e})")
    g0 = _hermitian_part(g0)
    if np.min(np.linalg.eigvalsh(g0)) <= 0:
        raise SolverError("Effective matrix is not positive definite")
    if g is not None:
        lower = np.min(np.linalg.eigvalsh(_hermitian_part(g0 - harmonic_mean(g))))
        upper = np.min(np.linalg.eigvalsh(_hermitian_part(cell_mean(g) - g0)))
        if min(lower, upper) < -VOIGT_REUSS_TOL * scale:
            raise SolverError(
                f"Voigt-Reuss bracket violated (lower margin {lower:.2e}, upper margin {upper:.2e})"
            )
    return g0


def compute_V(lam: PeriodicField, lam_tilde: PeriodicField, g: PeriodicField, b: SymbolB) -> np.ndarray:
    """V = mean((b(D)Λ)* g b(D)Λ̃), an m×n matrix."""
    b_lam = apply_symbol_values(lam.values, b)
    b_lam_tilde = apply_symbol_values(lam_tilde.values, b)
    integrand = np.conj(np.swapaxes(b_lam, -1, -2)) @ g.values @ b_lam_tilde
    return integrand.mean(axis=tuple(range(b.dim)))


def compute_W(lam_tilde: PeriodicField, g: PeriodicField, b: SymbolB) -> np.ndarray:
    """W = mean((b(D)Λ̃)* g b(D)Λ̃), Hermitian and nonnegative."""
    b_lam_tilde = apply_symbol_values(lam_tilde.values, b)
    integrand = np.conj(np.swapaxes(b_lam_tilde, -1, -2)) @ g.values @ b_lam_tilde
    W = _hermitian_part(integrand.mean(axis=tuple(range(b.dim))))
    scale = max(1.0, float(np.max(np.abs(W))))
    if np.min(np.linalg.eigvalsh(W)) < -1e-12 * scale:
        raise SolverError("W has a negative eigenvalue")
    return W


def solve_cell_problems(g: PeriodicField, b: SymbolB, a: Sequence[PeriodicField]) -> CellSolution:
    """Both cell problems plus g̃, g⁰, V and W."""
    lam, res_lam = solve_lambda(g, b)
    lam_tilde, res_tilde = solve_lambda_tilde(g, b, a)
    g_tilde = assemble_g_tilde(g, lam, b)
    g0 = effective_matrix(g_tilde, g=g)
    V = compute_V(lam, lam_tilde, g, b)
    W = compute_W(lam_tilde, g, b)
    b_lam = make_field(apply_symbol_values(lam.values, b), g.lattice, piecewise=g.piecewise)
    b_lam_tilde = make_field(apply_symbol_values(lam_tilde.values, b), g.lattice, piecewise=g.piecewise)
    logger.info("Cell solve N=%d: residuals %.1e / %.1e", g.n_grid, res_lam, res_tilde)
    return CellSolution(lam=lam, lam_tilde=lam_tilde, g_tilde=g_tilde, g0=g0, V=V, W=W,
                        residuals=(res_lam, res_tilde), b_lam=b_lam, b_lam_tilde=b_lam_tilde,
                        g=g, symbol=b)


def laminate_drift(g_fine: PeriodicField, g_coarse: PeriodicField, b: SymbolB) -> float:
    """Relative change of g⁰ between two resolutions of the same piecewise field."""
    g0_fine = effective_matrix(assemble_g_tilde(g_fine, solve_lambda(g_fine, b)[0], b))
    g0_coarse = effective_matrix(assemble_g_tilde(g_coarse, solve_lambda(g_coarse, b)[0], b))
    return float(np.linalg.norm(g0_fine - g0_coarse) / np.linalg.norm(g0_fine))


def cell_norm_bounds(cell: CellSolution, a: Sequence[PeriodicField]) -> Dict[str, Tuple[float, float]]:
    """L²(Ω) norms of Λ, b(D)Λ, Λ̃, b(D)Λ̃ and the spectral norms of V, W next to their a-priori bounds."""
    g, b = cell.g, cell.symbol
    lattice = g.lattice
    axes = tuple(range(b.dim))
    volume = lattice.cell_volume

    def l2(values):
        return float(np.sqrt(volume * np.sum(np.abs(values) ** 2, axis=(-2, -1)).mean(axis=axes)))

    g_sup, g_inv = sup_norm(g), inverse_sup_norm(g)
    c_a = float(np.sqrt(sum(volume * np.sum(np.abs(a_j.values) ** 2, axis=(-2, -1)).mean(axis=axes)
                            for a_j in a)))
    m1 = np.sqrt(b.m) / (2 * lattice.r0) * b.alpha0 ** -0.5 * np.sqrt(g_sup * g_inv)
    b_lam_norm = l2(cell.b_lam.values)
    b_tilde_norm = l2(cell.b_lam_tilde.values)
    return {
        'b_lambda': (b_lam_norm, np.sqrt(volume * b.m * g_sup * g_inv)),
        'lambda': (l2(cell.lam.values), np.sqrt(volume) * m1),
        'b_lambda_tilde': (b_tilde_norm, c_a * np.sqrt(b.n) * b.alpha0 ** -0.5 * g_inv),
        'lambda_tilde': (l2(cell.lam_tilde.values),
                         c_a * np.sqrt(b.n) / (2 * lattice.r0) / b.alpha0 * g_inv),
        'V': (float(np.linalg.norm(cell.V, 2)), g_sup * b_lam_norm * b_tilde_norm / volume),
        'W': (float(np.linalg.norm(cell.W, 2)), g_sup * b_tilde_norm ** 2 / volume),
    }


# =============================================================================
# Coercivity shift λ
# =============================================================================

def _fourier_coefficients(field: PeriodicField) -> np.ndarray:
    d = field.dim
    return fft_field(field.values, d) / field.n_grid ** d


def _block_matrix(blocks: np.ndarray) -> np.ndarray:
    """(M, M, n, n) blocks → (M n, M n) matrix."""
    count, _, n, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(count * n, count * n)


def _form_blocks(g, b, a, Q, Q0, n_modes: int, quasi: np.ndarray):
    """Galerkin matrices of the cell form on Bloch waves e^{2πi(k+κ)·y}, |k_j| <= K."""
    d = b.dim
    n_grid = g.n_grid
    ks = np.array(list(itertools.product(range(-n_modes, n_modes + 1), repeat=d)), dtype=float)
    xi = 2 * np.pi * (ks + quasi)
    diff = np.mod((ks[:, None, :] - ks[None, :, :]).astype(int), n_grid)
    index = tuple(diff[..., j] for j in range(d))

    bxi = b.symbol(xi)
    g_hat = _fourier_coefficients(g)[index]
    principal = np.einsum('kma,klmp,lpb->klab', np.conj(bxi), g_hat, bxi)
    lower = np.zeros_like(principal)
    for j, a_j in enumerate(a):
        a_hat = _fourier_coefficients(a_j)[index]
        a_adj = np.conj(np.swapaxes(a_j.values, -1, -2))
        a_adj_hat = fft_field(a_adj, d)[index] / n_grid ** d
        lower += a_hat * xi[None, :, j, None, None] + xi[:, None, j, None, None] * a_adj_hat
    potential = _fourier_coefficients(Q)[index]
    weight = _fourier_coefficients(Q0)[index]
    eye = np.eye(b.n)
    gradient = np.zeros_like(principal)
    gradient[np.arange(len(ks)), np.arange(len(ks))] = np.sum(xi ** 2, axis=1)[:, None, None] * eye
    return tuple(_block_matrix(x) for x in (principal, lower, potential, weight, gradient))


def coercivity_margin(blocks_by_quasi, c_star: float, lam: float) -> float:
    """Smallest eigenvalue of form(λ) − c_*‖D·‖² over the Bloch test spaces and scales."""
    worst = np.inf
    for principal, lower, potential, weight, gradient in blocks_by_quasi:
        for s in LAMBDA_SCALES:
            form = principal + s * lower + s ** 2 * (potential + lam * weight) - c_star * gradient
            worst = min(worst, float(np.min(np.linalg.eigvalsh(_hermitian_part(form)))))
    return worst


def choose_lambda_shift(g: PeriodicField, b: SymbolB, a: Sequence[PeriodicField],
                        Q: PeriodicField, Q0: PeriodicField, lattice: Lattice) -> float:
    """Smallest λ in {0, 1, 2, 4, ...} making the discrete cell form coercive
    with margin ¼ α₀ ‖g⁻¹‖⁻¹ ‖D u‖² on Bloch waves at quasi-momenta 0 and ½."""
    require_cubic(lattice, "Lambda search")
    _check_coefficient(g, b)
    if not Q0.positive:
        raise ConfigError("Q0 must be Hermitian positive definite")
    d = b.dim
    n_modes = max(1, min(LAMBDA_TEST_MODES[d], g.n_grid // 4 - 1))
    c_star = 0.25 * b.alpha0 / inverse_sup_norm(g)
    blocks = [_form_blocks(g, b, a, Q, Q0, n_modes, np.array(quasi))
              for quasi in itertools.product((0.0, 0.5), repeat=d)]
    scale = max(1.0, float(np.max([np.max(np.abs(x[0])) for x in blocks])))

    lam = 0.0
    while lam <= LAMBDA_SEARCH_CAP:
        margin = coercivity_margin(blocks, c_star, lam)
        if margin >= -1e-10 * scale:
            logger.info("Coercivity shift lambda=%g (margin %.3e)", lam, margin)
            return lam
        lam = 1.0 if lam == 0.0 else 2.0 * lam
    raise CoercivityError("Lambda search exceeded 2**64; coefficients are pathological")


# =============================================================================
# Effective operator
# =============================================================================

def assemble_effective(cell: CellSolution, a: Sequence[PeriodicField], Q: PeriodicField,
                       Q0: PeriodicField, lambda_shift: float) -> EffectiveOperator:
    """Collect the constant coefficients of B⁰ and check the symbol bounds
    c_*|ξ|² <= L(ξ) <= C_L(|ξ|² + 1) on |ξ| in {1, 10}."""
    b = cell.symbol
    n = b.n
    if Q.shape != (n, n) or Q0.shape != (n, n):
        raise ConfigError(f"Q and Q0 must be {n}×{n}")
    if lambda_shift < 0:
        raise ConfigError("lambda_shift must be nonnegative")
    a_mean = np.array([cell_mean(a_j) + np.conj(cell_mean(a_j).T) for a_j in a])
    q_mean = _hermitian_part(cell_mean(Q))
    q0_mean = _hermitian_part(cell_mean(Q0))
    c_star_bound = 0.25 * b.alpha0 / inverse_sup_norm(cell.g)

    draft = EffectiveOperator(g0=cell.g0, V=cell.V, W=cell.W, a_mean=a_mean, Q_mean=q_mean,
                              Q0_mean=q0_mean, lambda_shift=float(lambda_shift), symbol_b=b,
                              c_star=0.0, c_star_bound=c_star_bound, C_L=0.0)
    directions = unit_directions(b.dim)
    if b.dim == 1:
        directions = np.array([[1.0], [-1.0]])
    lowest, highest = np.inf, 0.0
    for radius in (1.0, 10.0):
        xi = radius * directions
        symbols = draft.symbol(xi)
        asymmetry = np.max(np.abs(symbols - np.conj(np.swapaxes(symbols, -1, -2))))
        if asymmetry > 1e-10 * max(1.0, float(np.max(np.abs(symbols)))):
            raise ConfigError("Effective symbol is not Hermitian")
        eigs = np.linalg.eigvalsh(_hermitian_part(symbols))
        lowest = min(lowest, float(eigs.min()) / radius ** 2)
        highest = max(highest, float(eigs.max()) / (radius ** 2 + 1))
    if lowest <= 0:
        raise CoercivityError(f"Effective symbol lower bound c_* = {lowest:.3e} is not positive")
    logger.info("Effective symbol bounds: c_*=%.4g (theory %.4g), C_L=%.4g", lowest, c_star_bound, highest)
    return EffectiveOperator(g0=cell.g0, V=cell.V, W=cell.W, a_mean=a_mean, Q_mean=q_mean,
                             Q0_mean=q0_mean, lambda_shift=float(lambda_shift), symbol_b=b,
                             c_star=lowest, c_star_bound=c_star_bound, C_L=highest)


def effective_magnetic_form(effective: EffectiveOperator, g: PeriodicField,
                            A: Sequence[PeriodicField], V_pot: PeriodicField) -> Dict[str, np.ndarray]:
    """Effective magnetic potential A⁰ and potential V⁰ of a scalar operator
    (D − A)* g (D − A) + V, so that L(ξ) = (ξ − A⁰)ᵀ g⁰ (ξ − A⁰) + V⁰ + λ Q̄₀."""
    if effective.n != 1:
        raise ConfigError("Magnetic form is defined for scalar operators only")
    d = g.dim
    g0 = effective.g0.real
    potential = np.stack([field.values[..., 0, 0].real for field in A], axis=-1)
    flux = np.einsum('...jk,...k->...j', g.values.real, potential)
    axes = tuple(range(d))
    a0 = np.linalg.solve(g0, effective.V[:, 0].real + flux.mean(axis=axes))
    energy = np.einsum('...j,...j->...', flux, potential).mean(axis=axes)
    v0 = (V_pot.values[..., 0, 0].real.mean(axis=axes) + energy - a0 @ g0 @ a0
          - effective.W[0, 0].real)
    return {'A0': a0, 'V0': float(v0)}


# =============================================================================
# Whole pipeline
# =============================================================================

def solve_cell(problem, n_grid: int) -> Tuple[CellSolution, EffectiveOperator]:
    """Sample a problem on the N^d cell grid and run the cell pipeline:
    Λ, Λ̃, g̃, g⁰, V, W, the shift λ and the effective operator.

    ``problem`` is any object with ``sample(n_grid)`` returning Coefficients
    and ``symbol()`` returning the SymbolB (see homog.model_zoo.ProblemSpec).
    """
    return solve_cell_coefficients(problem.sample(n_grid), problem.symbol())


def solve_cell_coefficients(coeffs: Coefficients, b: SymbolB) -> Tuple[CellSolution, EffectiveOperator]:
    cell = solve_cell_problems(coeffs.g, b, coeffs.a)
    lam = choose_lambda_shift(coeffs.g, b, coeffs.a, coeffs.Q, coeffs.Q0, coeffs.lattice)
    effective = assemble_effective(cell, coeffs.a, coeffs.Q, coeffs.Q0, lam)
    return cell, effective
