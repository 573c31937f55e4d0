"""
First-order approximation of the oscillating solution.

Given the effective solution u₀ on the mesh of O, builds

    v_ε = u₀ + ε Λ^ε S_ε b(D)ũ₀ + ε Λ̃^ε S_ε ũ₀,

where ũ₀ is an extension of u₀ beyond O and S_ε the Steklov smoothing,
the flux approximation g̃^ε S_ε b(D)ũ₀ + g^ε (b(D)Λ̃)^ε S_ε ũ₀, and the
boundary cutoff θ_ε with the trace of the corrector on ∂O that the
boundary-layer problem has to cancel.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from homog.bvp_solver import DomainMesh, gradient_at_quadrature, quadrature_points, values_at_quadrature
from homog.cell_solver import CellSolution
from homog.errors import ConfigError
from homog.periodic_core import oscillate, steklov_smooth

logger = logging.getLogger(__name__)

EXTENSION_RULE = 'c1-reflection'


@dataclass(frozen=True, eq=False)
class ExtendedFunction:
    """Nodal values on the box O enlarged by ``pad`` mesh steps on every side."""
    values: np.ndarray
    pad: int
    h: float
    lower: np.ndarray
    rule: str
    c_ext: float

    @property
    def dim(self) -> int:
        return len(self.lower)

    def restrict(self) -> np.ndarray:
        """Values on the nodes of O, shape mesh.shape + (n,)."""
        p = self.pad
        return self.values[tuple(slice(p, -p) for _ in range(self.dim))]


@dataclass(frozen=True, eq=False)
class CorrectorOutput:
    """v_ε and its pieces, nodal arrays of shape (n_nodes, n); flux at quadrature points (E, Q, m)."""
    v_eps: np.ndarray
    K_term: np.ndarray
    flux: np.ndarray
    w_trace: np.ndarray
    epsilon: float
    zeta: Optional[complex]
    smoothing: bool
    mu: float = 0.0


def _h2_seminorm(values: np.ndarray, h: float, d: int) -> float:
    total = 0.0
    for l in range(d):
        first = np.gradient(values, h, axis=l)
        for j in range(d):
            total += np.sum(np.abs(np.gradient(first, h, axis=j)) ** 2)
    return float(np.sqrt(total * h ** d))


def _reflect_axis(values: np.ndarray, axis: int, pad: int) -> np.ndarray:
    """Pad along ``axis`` with ũ(−s) = 3u(s) − 2u(2s) on both ends."""
    moved = np.moveaxis(values, axis, 0)
    k = np.arange(pad, 0, -1)
    left = 3 * moved[k] - 2 * moved[2 * k]
    last = moved.shape[0] - 1
    k = np.arange(1, pad + 1)
    right = 3 * moved[last - k] - 2 * moved[last - 2 * k]
    return np.moveaxis(np.concatenate([left, moved, right], axis=0), 0, axis)


def extension_pad(mesh: DomainMesh, epsilon: float, r1: float) -> int:
    """Mesh steps needed beyond ∂O: ε r₁ + 2h rounded up."""
    return int(np.ceil((epsilon * r1 + 2 * mesh.h) / mesh.h - 1e-9))


def extend(u0: np.ndarray, mesh: DomainMesh, epsilon: float, r1: float) -> ExtendedFunction:
    """Extend nodal data on O across every face by C¹ reflection.

    Args:
        u0: Nodal values (n_nodes, n) or (n_nodes,)
        mesh: Mesh of O
        epsilon: Smoothing scale the extension has to support
        r1: Outer radius of the periodicity cell

    Returns:
        ExtendedFunction whose restriction to O equals u0 exactly
    """
    u0 = np.asarray(u0, dtype=complex).reshape(mesh.shape + (-1,))
    pad = extension_pad(mesh, epsilon, r1)
    for j, size in enumerate(mesh.shape):
        if 2 * pad > size - 1:
            raise ConfigError(f"Extension margin {pad} steps exceeds half the box along axis {j + 1}; "
                              f"epsilon={epsilon:g} is too large for this domain")
    values = u0
    for axis in range(mesh.dim):
        values = _reflect_axis(values, axis, pad)

    inner = _h2_seminorm(u0, mesh.h, mesh.dim)
    outer = _h2_seminorm(values, mesh.h, mesh.dim)
    c_ext = outer / inner if inner > 0 else 0.0
    return ExtendedFunction(values=values, pad=pad, h=mesh.h, lower=mesh.lower - pad * mesh.h,
                            rule=EXTENSION_RULE, c_ext=c_ext)


def apply_b_nodal(values: np.ndarray, cell: CellSolution, h: float, d: int) -> np.ndarray:
    """b(D)u = Σ_j b_j (−i ∂_j u) by second-order differences; values grid + (n,) → grid + (m,)."""
    bm = cell.symbol.b_matrices
    out = 0
    for j in range(d):
        derivative = np.gradient(values, h, axis=j, edge_order=2)
        out = out + np.einsum('mn,...n->...m', bm[j], -1j * derivative)
    return out


def _smoothed_pieces(u0: np.ndarray, mesh: DomainMesh, cell: CellSolution, epsilon: float,
                     smoothing: bool) -> Tuple[np.ndarray, np.ndarray]:
    """(S_ε b(D)ũ₀, S_ε ũ₀) on the nodes of O, or the unsmoothed pair."""
    d = mesh.dim
    if not smoothing:
        grid = np.asarray(u0, dtype=complex).reshape(mesh.shape + (-1,))
        return apply_b_nodal(grid, cell, mesh.h, d), grid
    lattice = cell.g.lattice
    ext = extend(u0, mesh, epsilon, lattice.r1)
    b_ext = apply_b_nodal(ext.values, cell, mesh.h, d)
    smooth_b = steklov_smooth(b_ext, epsilon, lattice, mesh.h, mode='nearest')
    smooth_u = steklov_smooth(ext.values, epsilon, lattice, mesh.h, mode='nearest')
    inner = tuple(slice(ext.pad, -ext.pad) for _ in range(d))
    logger.debug("Extension pad=%d steps, H2 ratio %.3f", ext.pad, ext.c_ext)
    return smooth_b[inner], smooth_u[inner]


def _corrector_term(b_u: np.ndarray, u: np.ndarray, mesh: DomainMesh, cell: CellSolution,
                    epsilon: float) -> np.ndarray:
    """ε(Λ^ε b_u + Λ̃^ε u) at the nodes, shape (n_nodes, n)."""
    b_u = b_u.reshape(mesh.n_nodes, -1)
    u = u.reshape(mesh.n_nodes, cell.symbol.n)
    coords = mesh.coords
    lam = oscillate(cell.lam, epsilon, coords)
    lam_tilde = oscillate(cell.lam_tilde, epsilon, coords)
    return epsilon * (np.einsum('pnm,pm->pn', lam, b_u) + np.einsum('pnk,pk->pn', lam_tilde, u))


def _boundary_trace(term: np.ndarray, mesh: DomainMesh) -> np.ndarray:
    trace = np.zeros_like(term)
    nodes = mesh.boundary_nodes
    trace[nodes] = term[nodes]
    return trace


def _flux(b_q: np.ndarray, u_q: np.ndarray, cell: CellSolution, epsilon: float,
          mesh: DomainMesh) -> np.ndarray:
    points, _ = quadrature_points(mesh)
    flat = points.reshape(-1, mesh.dim)
    shape = b_q.shape[:2]
    g_tilde = oscillate(cell.g_tilde, epsilon, flat).reshape(shape + cell.g_tilde.shape)
    g = oscillate(cell.g, epsilon, flat).reshape(shape + cell.g.shape)
    b_lam_tilde = oscillate(cell.b_lam_tilde, epsilon, flat).reshape(shape + cell.b_lam_tilde.shape)
    return (np.einsum('eqab,eqb->eqa', g_tilde, b_q)
            + np.einsum('eqab,eqbc,eqc->eqa', g, b_lam_tilde, u_q))


def _smoothed_flux(b_u: np.ndarray, u: np.ndarray, cell: CellSolution, epsilon: float,
                   mesh: DomainMesh) -> np.ndarray:
    b_q = values_at_quadrature(mesh, b_u.reshape(mesh.n_nodes, -1))
    u_q = values_at_quadrature(mesh, u.reshape(mesh.n_nodes, cell.symbol.n))
    return _flux(b_q, u_q, cell, epsilon, mesh)


def _plain_flux(u0: np.ndarray, cell: CellSolution, epsilon: float, mesh: DomainMesh) -> np.ndarray:
    u0 = u0.reshape(mesh.n_nodes, cell.symbol.n)
    grad = gradient_at_quadrature(mesh, u0)
    b_q = np.einsum('jmn,eqjn->eqm', cell.symbol.b_matrices, -1j * grad)
    return _flux(b_q, values_at_quadrature(mesh, u0), cell, epsilon, mesh)


def flux_approx(u0: np.ndarray, cell: CellSolution, epsilon: float, mesh: DomainMesh,
                smoothing: bool = True) -> np.ndarray:
    """g̃^ε S_ε b(D)ũ₀ + g^ε (b(D)Λ̃)^ε S_ε ũ₀ at the mesh quadrature points, shape (E, Q, m).

    With ``smoothing`` off: g̃^ε b(D)u₀ + g^ε (b(D)Λ̃)^ε u₀, with b(D)u₀ the exact
    gradient of the finite-element function.
    """
    u0 = np.asarray(u0, dtype=complex)
    if not smoothing:
        return _plain_flux(u0, cell, epsilon, mesh)
    b_u, u = _smoothed_pieces(u0, mesh, cell, epsilon, True)
    return _smoothed_flux(b_u, u, cell, epsilon, mesh)


def first_order_approx(u0: np.ndarray, cell: CellSolution, epsilon: float, mesh: DomainMesh,
                       zeta: Optional[complex] = None) -> CorrectorOutput:
    """v_ε = u₀ + ε(Λ^ε S_ε b(D)ũ₀ + Λ̃^ε S_ε ũ₀) restricted to O."""
    u0 = np.asarray(u0, dtype=complex).reshape(mesh.n_nodes, -1)
    b_u, u = _smoothed_pieces(u0, mesh, cell, epsilon, True)
    term = _corrector_term(b_u, u, mesh, cell, epsilon)
    return CorrectorOutput(v_eps=u0 + term, K_term=term, flux=_smoothed_flux(b_u, u, cell, epsilon, mesh),
                           w_trace=_boundary_trace(term, mesh), epsilon=epsilon, zeta=zeta,
                           smoothing=True)


def corrector_no_smoothing(u0: np.ndarray, cell: CellSolution, epsilon: float, mesh: DomainMesh,
                           zeta: Optional[complex] = None) -> CorrectorOutput:
    """v_ε = u₀ + ε(Λ^ε b(D)u₀ + Λ̃^ε u₀); b(D)u₀ one-sided at ∂O."""
    u0 = np.asarray(u0, dtype=complex).reshape(mesh.n_nodes, -1)
    b_u, u = _smoothed_pieces(u0, mesh, cell, epsilon, False)
    term = _corrector_term(b_u, u, mesh, cell, epsilon)
    return CorrectorOutput(v_eps=u0 + term, K_term=term, flux=_plain_flux(u0, cell, epsilon, mesh),
                           w_trace=_boundary_trace(term, mesh), epsilon=epsilon, zeta=zeta,
                           smoothing=False)


def zeroth_order_approx(u0: np.ndarray, cell: CellSolution, epsilon: float, mesh: DomainMesh,
                        zeta: Optional[complex] = None) -> CorrectorOutput:
    """v_ε = u₀ with flux g⁰ b(D)u₀ (corrector switched off)."""
    u0 = np.asarray(u0, dtype=complex).reshape(mesh.n_nodes, -1)
    grad = gradient_at_quadrature(mesh, u0)
    b_q = np.einsum('jmn,eqjn->eqm', cell.symbol.b_matrices, -1j * grad)
    flux = np.einsum('ab,eqb->eqa', cell.g0, b_q)
    zero = np.zeros_like(u0)
    return CorrectorOutput(v_eps=u0.copy(), K_term=zero, flux=flux, w_trace=zero.copy(), epsilon=epsilon,
                           zeta=zeta, smoothing=False)


def _smootherstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10 - 15 * t + 6 * t ** 2)


def boundary_cutoff(mesh: DomainMesh, epsilon: float) -> Tuple[np.ndarray, float]:
    """θ_ε at the nodes: 1 on ∂O, 0 beyond distance ε/2; returns (θ, max ε|∇θ|)."""
    width = epsilon / 2
    if width < 4 * mesh.h - 1e-14:
        raise ConfigError(f"Boundary strip epsilon/2={width:g} is thinner than 4h={4 * mesh.h:g}")
    coords = mesh.coords
    distance = np.min(np.minimum(coords - mesh.lower, mesh.upper - coords), axis=1)
    theta = 1.0 - _smootherstep(distance / width)
    grid = theta.reshape(mesh.shape)
    slopes = np.gradient(grid, mesh.h) if mesh.dim > 1 else [np.gradient(grid, mesh.h)]
    mu = epsilon * float(np.max(np.sqrt(sum(np.abs(s) ** 2 for s in slopes))))
    return theta, mu


def boundary_corrector_trace(u0: np.ndarray, cell: CellSolution, epsilon: float, mesh: DomainMesh,
                             corrector: Optional[CorrectorOutput] = None) -> Tuple[np.ndarray, np.ndarray, float]:
    """φ_ε = θ_ε · ε(Λ^ε S_ε b(D)ũ₀ + Λ̃^ε S_ε ũ₀).

    Args:
        corrector: Smoothed first-order output built from the same u0 and ε;
            its K_term is reused instead of smoothing u0 again

    Returns:
        (nodal φ_ε, nodal θ_ε, μ); the trace of φ_ε on ∂O is the boundary
        data for solve_boundary_layer
    """
    theta, mu = boundary_cutoff(mesh, epsilon)
    if corrector is not None:
        if corrector.epsilon != epsilon:
            raise ConfigError(f"Corrector was built for epsilon={corrector.epsilon:g}, not {epsilon:g}")
        if not corrector.smoothing:
            raise ConfigError("Boundary data needs the smoothed first-order corrector")
        term = corrector.K_term
    else:
        u0 = np.asarray(u0, dtype=complex).reshape(mesh.n_nodes, -1)
        b_u, u = _smoothed_pieces(u0, mesh, cell, epsilon, True)
        term = _corrector_term(b_u, u, mesh, cell, epsilon)
    return theta[:, None] * term, theta, mu
