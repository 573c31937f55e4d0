"""
Dirichlet boundary-value solver on an interval or rectangle.

Discretization: multilinear (Q1) elements on a uniform tensor mesh,
2-point Gauss quadrature per axis, coefficients evaluated at quadrature
points. A sesquilinear form is described by its coefficients at the
quadrature points,

    b[u, v] = ∫ Σ_lj ∂_l v* K_lj ∂_j u + Σ_j v* P_j ∂_j u + Σ_l ∂_l v* R_l u + v* C u,

which covers the oscillating form b_{D,ε}, the effective form b_D⁰ and the
norm matrices. Matrices are assembled over all nodes; Dirichlet nodes are
eliminated symmetrically when solving.

Usage:
    from homog.bvp_solver import build_mesh, assemble_oscillating, solve_resolvent

    mesh = build_mesh([(0.0, 1.0)], 1 / 512)
    system = assemble_oscillating(mesh, coeffs, b, 1 / 32, lambda_shift)
    result = solve_resolvent(system, -1.0, F)
"""

import itertools
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from homog.errors import CoercivityError, ConfigError, SolverError
from homog.periodic_core import Coefficients, SymbolB, oscillate

logger = logging.getLogger(__name__)

SOLVE_TOL = 1e-10
REFINEMENT_STEPS = 3
HERMITIAN_TOL = 1e-12
MIN_RATIO = 16
CHUNK_ELEMENTS = 32768
COERCIVITY_CHECK_LIMIT = 300_000
GAUSS_POINTS = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


# =============================================================================
# Mesh
# =============================================================================

@dataclass(frozen=True, eq=False)
class DomainMesh:
    """Uniform tensor mesh of the box O with optional inner box O'."""
    lower: np.ndarray
    upper: np.ndarray
    h: float
    shape: Tuple[int, ...]
    interior_margin: Optional[float] = None

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def coords(self) -> np.ndarray:
        axes = [self.lower[j] + self.h * np.arange(self.shape[j]) for j in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, self.dim)

    @property
    def boundary_mask(self) -> np.ndarray:
        index = np.indices(self.shape).reshape(self.dim, -1)
        mask = np.zeros(self.n_nodes, dtype=bool)
        for j in range(self.dim):
            mask |= (index[j] == 0) | (index[j] == self.shape[j] - 1)
        return mask

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask)[0]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.nonzero(self.boundary_mask)[0]

    @property
    def subdomain(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        if self.interior_margin is None:
            return None
        return self.lower + self.interior_margin, self.upper - self.interior_margin

    @property
    def n_elements(self) -> int:
        return int(np.prod([s - 1 for s in self.shape]))

    def element_nodes(self) -> np.ndarray:
        """(E, 2^d) global node indices, local order = itertools.product((0, 1), repeat=d)."""
        cells = np.indices([s - 1 for s in self.shape]).reshape(self.dim, -1)
        offsets = list(itertools.product((0, 1), repeat=self.dim))
        columns = [np.ravel_multi_index(tuple(cells[j] + o[j] for j in range(self.dim)), self.shape)
                   for o in offsets]
        return np.stack(columns, axis=1)

    def element_origins(self) -> np.ndarray:
        cells = np.indices([s - 1 for s in self.shape]).reshape(self.dim, -1).T
        return self.lower + self.h * cells

    def element_mask(self, region: Optional[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        """Elements lying inside the closed box ``region``."""
        origins = self.element_origins()
        if region is None:
            return np.ones(len(origins), dtype=bool)
        lo, hi = region
        tol = 1e-9 * self.h
        return np.all((origins >= lo - tol) & (origins + self.h <= hi + tol), axis=1)

    def same_as(self, other: 'DomainMesh') -> bool:
        return (self.shape == other.shape and abs(self.h - other.h) <= 1e-14
                and np.allclose(self.lower, other.lower) and np.allclose(self.upper, other.upper))


def _as_multiple(length: float, h: float, what: str) -> int:
    count = length / h
    if abs(count - round(count)) > 1e-9 * max(1.0, count) or round(count) < 1:
        raise ConfigError(f"{what} {length:g} is not a positive multiple of h={h:g}")
    return int(round(count))


def build_mesh(box: Sequence[Sequence[float]], h: float,
               interior_margin: Optional[float] = None) -> DomainMesh:
    """Uniform mesh of an interval or rectangle.

    Args:
        box: [(lo, hi)] per axis, d <= 2
        h: Mesh spacing dividing every edge
        interior_margin: Distance δ of the inner box O' from ∂O (multiple of h, >= 2h)
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    d = box.shape[0]
    if not 1 <= d <= 2:
        raise ConfigError(f"Boundary-value solves support d = 1, 2; got d = {d}")
    if h <= 0:
        raise ConfigError(f"Mesh spacing must be positive, got {h}")
    lengths = box[:, 1] - box[:, 0]
    if np.any(lengths <= 0):
        raise ConfigError(f"Degenerate box {box.tolist()}")
    shape = tuple(_as_multiple(length, h, "Box edge") + 1 for length in lengths)
    if interior_margin is not None:
        _as_multiple(interior_margin, h, "Interior margin")
        if interior_margin < 2 * h - 1e-14:
            raise ConfigError(f"Interior margin {interior_margin:g} must be at least 2h")
        if 2 * interior_margin >= lengths.min():
            raise ConfigError(f"Interior margin {interior_margin:g} leaves no inner box")
    return DomainMesh(lower=box[:, 0].copy(), upper=box[:, 1].copy(), h=float(h), shape=shape,
                      interior_margin=interior_margin)


# =============================================================================
# Quadrature and assembly
# =============================================================================

def _reference_basis(d: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gauss points (Q, d), weights (Q,), basis values (Q, 2^d), reference gradients (Q, 2^d, d)."""
    points = np.array(list(itertools.product(GAUSS_POINTS, repeat=d)))
    weights = np.full(len(points), 0.5 ** d)
    offsets = np.array(list(itertools.product((0, 1), repeat=d)))
    factors = np.where(offsets[None, :, :] == 1, points[:, None, :], 1 - points[:, None, :])
    signs = np.where(offsets == 1, 1.0, -1.0)
    phi = np.prod(factors, axis=-1)
    dphi = np.empty(phi.shape + (d,))
    for l in range(d):
        others = np.prod(np.delete(factors, l, axis=-1), axis=-1) if d > 1 else np.ones_like(phi)
        dphi[..., l] = signs[None, :, l] * others
    return points, weights, phi, dphi


def quadrature_points(mesh: DomainMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points (E, Q, d) and weights (Q,) including the cell volume."""
    ref_points, ref_weights, _, _ = _reference_basis(mesh.dim)
    points = mesh.element_origins()[:, None, :] + mesh.h * ref_points[None, :, :]
    return points, ref_weights * mesh.h ** mesh.dim


def values_at_quadrature(mesh: DomainMesh, u: np.ndarray) -> np.ndarray:
    """Nodal (n_nodes, n) → (E, Q, n) values of the Q1 interpolant."""
    _, _, phi, _ = _reference_basis(mesh.dim)
    local = u.reshape(mesh.n_nodes, -1)[mesh.element_nodes()]
    return np.einsum('qa,ean->eqn', phi, local)


def gradient_at_quadrature(mesh: DomainMesh, u: np.ndarray) -> np.ndarray:
    """Nodal (n_nodes, n) → (E, Q, d, n) gradients of the Q1 interpolant."""
    _, _, _, dphi = _reference_basis(mesh.dim)
    local = u.reshape(mesh.n_nodes, -1)[mesh.element_nodes()]
    return np.einsum('qal,ean->eqln', dphi / mesh.h, local)


CoefficientFn = Callable[[np.ndarray], Dict[str, np.ndarray]]


def assemble_form(mesh: DomainMesh, n: int, coefficients: CoefficientFn,
                  element_mask: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """Assemble the sesquilinear form whose coefficients ``coefficients(points)``
    returns at quadrature points (P, d): any of K (P, d, d, n, n), P, R (P, d, n, n), C (P, n, n)."""
    d = mesh.dim
    _, ref_weights, phi, dphi_ref = _reference_basis(d)
    dphi = dphi_ref / mesh.h
    weights = ref_weights * mesh.h ** d
    nq, nloc = phi.shape
    conn = mesh.element_nodes()
    origins = mesh.element_origins()
    ref_points, _, _, _ = _reference_basis(d)
    selected = np.arange(len(conn)) if element_mask is None else np.nonzero(element_mask)[0]

    rows, cols, vals = [], [], []
    comp = np.arange(n)
    for start in range(0, len(selected), CHUNK_ELEMENTS):
        block = selected[start:start + CHUNK_ELEMENTS]
        points = (origins[block][:, None, :] + mesh.h * ref_points[None, :, :]).reshape(-1, d)
        coeffs = coefficients(points)
        local = np.zeros((len(block), nloc, n, nloc, n), dtype=complex)
        if 'K' in coeffs:
            K = coeffs['K'].reshape(len(block), nq, d, d, n, n) * weights[None, :, None, None, None, None]
            local += np.einsum('qbl,eqljxy,qaj->ebxay', dphi, K, dphi)
        if 'P' in coeffs:
            P = coeffs['P'].reshape(len(block), nq, d, n, n) * weights[None, :, None, None, None]
            local += np.einsum('qb,eqjxy,qaj->ebxay', phi, P, dphi)
        if 'R' in coeffs:
            R = coeffs['R'].reshape(len(block), nq, d, n, n) * weights[None, :, None, None, None]
            local += np.einsum('qbl,eqlxy,qa->ebxay', dphi, R, phi)
        if 'C' in coeffs:
            C = coeffs['C'].reshape(len(block), nq, n, n) * weights[None, :, None, None]
            local += np.einsum('qb,eqxy,qa->ebxay', phi, C, phi)
        dof = conn[block][:, :, None] * n + comp[None, None, :]
        rows.append(np.broadcast_to(dof[:, :, :, None, None], local.shape).ravel())
        cols.append(np.broadcast_to(dof[:, None, None, :, :], local.shape).ravel())
        vals.append(local.ravel())
    size = mesh.n_nodes * n
    if not vals:
        return sp.csr_matrix((size, size), dtype=complex)
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(size, size)).tocsr()


def _constant(value: np.ndarray) -> CoefficientFn:
    return lambda points: np.broadcast_to(value, (points.shape[0],) + value.shape)


def norm_matrices(mesh: DomainMesh, n: int,
                  region: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """L² mass and gradient (Dirichlet energy) matrices, optionally over the elements of a sub-box."""
    eye = np.eye(n, dtype=complex)
    grad = np.einsum('lj,xy->ljxy', np.eye(mesh.dim), eye)
    mask = None if region is None else mesh.element_mask(region)
    mass = assemble_form(mesh, n, lambda p: {'C': _constant(eye)(p)}, mask)
    laplace = assemble_form(mesh, n, lambda p: {'K': _constant(grad)(p)}, mask)
    return mass, laplace


# =============================================================================
# Discrete systems
# =============================================================================

@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """Assembled form over all nodes plus the Dirichlet elimination map."""
    kind: str
    mesh: DomainMesh
    n: int
    stiffness: sp.csr_matrix
    mass_q0: sp.csr_matrix
    mass: sp.csr_matrix
    epsilon: Optional[float]
    lambda_shift: float

    @property
    def dofs(self) -> np.ndarray:
        """Unknown indices (interior nodes × components)."""
        return (self.mesh.interior_nodes[:, None] * self.n + np.arange(self.n)[None, :]).ravel()

    @property
    def boundary_dofs(self) -> np.ndarray:
        return (self.mesh.boundary_nodes[:, None] * self.n + np.arange(self.n)[None, :]).ravel()

    def restrict(self, matrix: sp.spmatrix) -> sp.csc_matrix:
        dofs = self.dofs
        return matrix.tocsr()[dofs][:, dofs].tocsc()

    def shifted(self, zeta: complex) -> sp.csr_matrix:
        return (self.stiffness - zeta * self.mass_q0).tocsr()


def _hermitian_defect(matrix: sp.spmatrix) -> float:
    diff = (matrix - matrix.conj().T).tocoo()
    scale = max(1.0, float(np.max(np.abs(matrix.tocoo().data))) if matrix.nnz else 1.0)
    return float(np.max(np.abs(diff.data)) / scale) if diff.nnz else 0.0


def negative_inertia(matrix: sp.spmatrix) -> int:
    """Number of negative eigenvalues of a Hermitian matrix from the pivots
    of a symmetric-mode LU (Sylvester's law of inertia)."""
    lu = spla.splu(matrix.tocsc(), permc_spec='MMD_AT_PLUS_A', diag_pivot_thresh=0.0,
                   options={'SymmetricMode': True})
    return int(np.sum(lu.U.diagonal().real < 0))


def _finalize(kind: str, mesh: DomainMesh, n: int, stiffness, mass_q0, epsilon, lambda_shift,
              check_coercivity: bool) -> DiscreteSystem:
    mass = assemble_form(mesh, n, lambda p: {'C': _constant(np.eye(n, dtype=complex))(p)})
    system = DiscreteSystem(kind=kind, mesh=mesh, n=n, stiffness=stiffness, mass_q0=mass_q0, mass=mass,
                            epsilon=epsilon, lambda_shift=float(lambda_shift))
    defect = _hermitian_defect(stiffness)
    if defect > HERMITIAN_TOL:
        raise SolverError(f"{kind} stiffness is not Hermitian (relative defect {defect:.2e})")
    if _hermitian_defect(mass_q0) > HERMITIAN_TOL:
        raise SolverError(f"{kind} Q0 mass is not Hermitian")
    if check_coercivity:
        size = len(system.dofs)
        if size > COERCIVITY_CHECK_LIMIT:
            logger.debug("Skipping coercivity check on %d unknowns", size)
        else:
            shifted = system.restrict(stiffness + 1e-10 * mass)
            if negative_inertia(shifted):
                raise CoercivityError(f"{kind} form is not coercive (negative eigenvalue); increase lambda")
    return system


def assemble_oscillating(mesh: DomainMesh, coeffs: Coefficients, b: SymbolB, epsilon: float,
                         lambda_shift: float, check_coercivity: bool = True) -> DiscreteSystem:
    """b_{D,ε}: (g^ε b(D)u, b(D)u) + 2Re Σ (D_j u, (a_j^ε)* u) + ((Q^ε + λQ₀^ε) u, u), and (Q₀^ε u, u)."""
    ratio = epsilon / mesh.h
    if ratio < MIN_RATIO - 1e-9:
        raise ConfigError(f"Mesh under-resolves epsilon: h={mesh.h:g} > epsilon/{MIN_RATIO}")
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise ConfigError(f"epsilon={epsilon:g} is not commensurate with h={mesh.h:g}")
    if b.dim != mesh.dim or coeffs.g.dim != mesh.dim:
        raise ConfigError("Coefficient dimension does not match the mesh")
    n = b.n
    bm = b.b_matrices
    bm_h = np.conj(np.swapaxes(bm, -1, -2))

    def form(points):
        g = oscillate(coeffs.g, epsilon, points)
        out = {
            'K': np.einsum('lam,pmk,jkb->pljab', bm_h, g, bm),
            'C': oscillate(coeffs.Q, epsilon, points) + lambda_shift * oscillate(coeffs.Q0, epsilon, points),
        }
        if coeffs.a:
            a_vals = np.stack([oscillate(a_j, epsilon, points) for a_j in coeffs.a], axis=1)
            out['P'] = -1j * a_vals
            out['R'] = 1j * np.conj(np.swapaxes(a_vals, -1, -2))
        return out

    started = time.perf_counter()
    stiffness = assemble_form(mesh, n, form)
    mass_q0 = assemble_form(mesh, n, lambda p: {'C': oscillate(coeffs.Q0, epsilon, p)})
    logger.debug("Assembled oscillating system eps=%g, %d nodes in %.2fs",
                 epsilon, mesh.n_nodes, time.perf_counter() - started)
    return _finalize('oscillating', mesh, n, stiffness, mass_q0, epsilon, lambda_shift, check_coercivity)


def assemble_effective(mesh: DomainMesh, eff, check_coercivity: bool = True) -> DiscreteSystem:
    """b_D⁰ with g⁰, −2Re(V·, b(D)·), −W, Q̄, λQ̄₀ and the ā_j terms; mass from Q̄₀."""
    b = eff.symbol_b
    if b.dim != mesh.dim:
        raise ConfigError("Effective operator dimension does not match the mesh")
    n = b.n
    bm = b.b_matrices
    bm_h = np.conj(np.swapaxes(bm, -1, -2))
    v_h = np.conj(eff.V.T)
    K = np.einsum('lam,mk,jkb->ljab', bm_h, eff.g0, bm)
    P = -0.5j * eff.a_mean + 1j * np.einsum('am,jmb->jab', v_h, bm)
    R = 0.5j * eff.a_mean - 1j * np.einsum('lam,mb->lab', bm_h, eff.V)
    C = eff.Q_mean - eff.W + eff.lambda_shift * eff.Q0_mean
    coefficients = {'K': K, 'P': P, 'R': R, 'C': C}

    stiffness = assemble_form(mesh, n, lambda p: {k: _constant(v)(p) for k, v in coefficients.items()})
    mass_q0 = assemble_form(mesh, n, lambda p: {'C': _constant(eff.Q0_mean)(p)})
    return _finalize('effective', mesh, n, stiffness, mass_q0, None, eff.lambda_shift, check_coercivity)


# =============================================================================
# Solves
# =============================================================================

@dataclass(frozen=True, eq=False)
class SolveResult:
    u: np.ndarray
    zeta: complex
    epsilon: Optional[float]
    residual: float
    wallclock: float
    kind: str = 'oscillating'


def check_zeta(zeta: complex, allow_real: bool = False) -> complex:
    zeta = complex(zeta)
    if not np.isfinite(zeta):
        raise ConfigError(f"zeta must be finite, got {zeta}")
    if zeta.imag == 0.0 and zeta.real >= 0.0 and not allow_real:
        raise ConfigError(f"zeta={zeta.real:g} lies on the positive real axis (spectrum); "
                          f"use a complex zeta or the rho-flat mode")
    return zeta


class ShiftedSolver:
    """Sparse LU of (stiffness − ζ mass_Q0) on the interior unknowns with
    iterative refinement; reused across loads."""

    def __init__(self, system: DiscreteSystem, zeta: complex, allow_real: bool = False):
        self.system = system
        self.zeta = check_zeta(zeta, allow_real)
        self.matrix = system.restrict(system.shifted(self.zeta))
        try:
            self.lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SolverError(f"Shifted matrix is singular at zeta={self.zeta}: {exc}") from exc

    def solve_dofs(self, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
        norm = np.linalg.norm(rhs)
        if norm == 0.0:
            return np.zeros_like(rhs, dtype=complex), 0.0
        x = self.lu.solve(rhs)
        residual = np.linalg.norm(rhs - self.matrix @ x) / norm
        for _ in range(REFINEMENT_STEPS):
            if residual <= SOLVE_TOL:
                break
            x = x + self.lu.solve(rhs - self.matrix @ x)
            residual = np.linalg.norm(rhs - self.matrix @ x) / norm
        if not np.all(np.isfinite(x)) or residual > SOLVE_TOL:
            raise SolverError(f"Shifted solve residual {residual:.2e} at zeta={self.zeta} "
                              f"(zeta may be near a discrete eigenvalue)")
        return x, float(residual)

    def solve(self, F: np.ndarray) -> SolveResult:
        """Solve with the L² load mass @ F; F nodal (n_nodes, n) or (n_nodes,)."""
        started = time.perf_counter()
        system = self.system
        F = np.asarray(F, dtype=complex).reshape(-1)
        if F.size != system.mesh.n_nodes * system.n:
            raise ConfigError(f"Load has {F.size} values, mesh needs {system.mesh.n_nodes * system.n}")
        if not np.all(np.isfinite(F)):
            raise ConfigError("Load has non-finite values")
        rhs = (system.mass @ F)[system.dofs]
        x, residual = self.solve_dofs(rhs)
        u = np.zeros(system.mesh.n_nodes * system.n, dtype=complex)
        u[system.dofs] = x
        return SolveResult(u=u.reshape(-1, system.n), zeta=self.zeta, epsilon=system.epsilon,
                           residual=residual, wallclock=time.perf_counter() - started, kind=system.kind)


def factorize(system: DiscreteSystem, zeta: complex, allow_real: bool = False) -> ShiftedSolver:
    return ShiftedSolver(system, zeta, allow_real)


def solve_resolvent(system: DiscreteSystem, zeta: complex, F: np.ndarray,
                    allow_real: bool = False) -> SolveResult:
    """Solve (stiffness − ζ mass_Q0) u = mass F with u = 0 on ∂O."""
    return factorize(system, zeta, allow_real).solve(F)


def solve_boundary_layer(mesh: DomainMesh, coeffs: Coefficients, b: SymbolB, epsilon: float,
                         lambda_shift: float, zeta: complex, boundary_data: np.ndarray,
                         system: Optional[DiscreteSystem] = None,
                         allow_real: bool = False) -> SolveResult:
    """(B_ε − ζQ₀^ε) w = 0 in O, w = boundary_data on ∂O, by lifting the trace.

    ``boundary_data`` is nodal (n_nodes, n); only boundary nodes are read.
    """
    started = time.perf_counter()
    if system is None:
        system = assemble_oscillating(mesh, coeffs, b, epsilon, lambda_shift)
    elif not system.mesh.same_as(mesh):
        raise ConfigError("Boundary-layer system was assembled on a different mesh")
    n = system.n
    lift = np.zeros(mesh.n_nodes * n, dtype=complex)
    data = np.asarray(boundary_data, dtype=complex).reshape(-1)
    bdofs = system.boundary_dofs
    lift[bdofs] = data[bdofs]

    shifted = system.shifted(zeta)
    rhs = -(shifted @ lift)[system.dofs]
    solver = factorize(system, zeta, allow_real)
    x, residual = solver.solve_dofs(rhs)
    w = lift.copy()
    w[system.dofs] = x

    interior = (shifted @ w)[system.dofs]
    scale = max(1.0, np.linalg.norm(rhs))
    if np.linalg.norm(interior) / scale > 1e-9:
        raise SolverError(f"Boundary-layer interior residual {np.linalg.norm(interior) / scale:.2e}")
    return SolveResult(u=w.reshape(-1, n), zeta=solver.zeta, epsilon=epsilon, residual=residual,
                       wallclock=time.perf_counter() - started, kind='boundary-layer')


def bottom_eigenvalue(system: DiscreteSystem, tol: float = 1e-6, maxiter: int = 500) -> float:
    """Smallest generalized eigenvalue of (stiffness, mass_Q0) on the interior
    unknowns, by inverse iteration."""
    stiffness = system.restrict(system.stiffness)
    weight = system.restrict(system.mass_q0)
    try:
        lu = spla.splu(stiffness)
    except RuntimeError as exc:
        raise SolverError(f"Stiffness is singular: {exc}") from exc
    x = np.ones(stiffness.shape[0], dtype=complex)
    mu = np.inf
    for iteration in range(maxiter):
        y = lu.solve(weight @ x)
        norm = np.sqrt(abs(np.vdot(y, weight @ y)))
        x = y / norm
        new_mu = float(np.real(np.vdot(x, stiffness @ x)))
        if abs(new_mu - mu) <= tol * abs(new_mu):
            logger.debug("Inverse iteration converged in %d steps: %.8g", iteration + 1, new_mu)
            return new_mu
        mu = new_mu
    raise SolverError(f"Inverse iteration did not converge in {maxiter} steps")


def l2_norm(u: np.ndarray, mass: sp.spmatrix) -> float:
    u = np.asarray(u).reshape(-1)
    return float(np.sqrt(max(0.0, np.real(np.vdot(u, mass @ u)))))


def h1_norm(u: np.ndarray, mass: sp.spmatrix, laplace: sp.spmatrix) -> float:
    u = np.asarray(u).reshape(-1)
    return float(np.sqrt(max(0.0, np.real(np.vdot(u, mass @ u) + np.vdot(u, laplace @ u)))))
