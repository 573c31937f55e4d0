"""
Verification harness: error norms, the angle weights c(φ) and ρ_♭(ζ),
sweeps over (ε, ζ), log-log slope fits and the rate report.

A sweep solves the oscillating and the effective Dirichlet problems with
the same seeded smooth load for every (ε, ζ), builds the first-order
approximation (and optionally the boundary layer w_ε) and records one
ErrorRow. fit_and_judge turns the rows into slopes and pass/fail
verdicts against named criteria.

Usage:
    from homog.verify_harness import run_sweep, fit_and_judge, write_csv

    result = run_sweep(problem, [1/8, 1/16, 1/32, 1/64], [-1.0])
    write_csv(result.rows, 'results/sweep.csv')
    report = fit_and_judge(result.rows, ['l2_rate', 'h1_corr_rate'])
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from homog.bvp_solver import (
    DiscreteSystem, DomainMesh, SolveResult, assemble_effective, assemble_oscillating, bottom_eigenvalue,
    build_mesh, factorize, gradient_at_quadrature, h1_norm, l2_norm, norm_matrices, quadrature_points,
    solve_boundary_layer,
)
from homog.cell_solver import CellSolution, EffectiveOperator, solve_cell_coefficients
from homog.config import CELL_N_DEFAULTS
from homog.corrector import (
    CorrectorOutput, boundary_corrector_trace, corrector_no_smoothing, first_order_approx, zeroth_order_approx,
)
from homog.errors import ConfigError, HomogError, InsufficientPointsError, annotate
from homog.io_utils import write_json
from homog.periodic_core import Coefficients, SymbolB, inverse_sup_norm, oscillate, sup_norm

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['epsilon', 'zeta_re', 'zeta_im', 'phi', 'err_l2', 'err_h1_plain', 'err_h1_corr',
               'err_h1_corr_nosmooth', 'err_h1_bl', 'err_h1_interior', 'err_flux', 'gap_l2', 'wall_s']
ERROR_COLUMNS = CSV_COLUMNS[4:12]
MIN_FIT_POINTS = 4
EXACT_TOL = 1e-12
C_FLAT_SAFETY = 0.95
SCALING_RATIO = 4.0
LOAD_MODES = 3
CSV_FLOAT_FORMAT = '%.12e'


# =============================================================================
# Weights
# =============================================================================

def c_phi(phi: float) -> float:
    """c(φ) = |sin φ|⁻¹ for φ in (0, π/2) ∪ (3π/2, 2π), 1 on [π/2, 3π/2]."""
    if not 0.0 < phi < 2 * np.pi:
        raise ConfigError(f"phi={phi} lies on the positive real axis; need 0 < phi < 2*pi")
    if np.pi / 2 <= phi <= 3 * np.pi / 2:
        return 1.0
    return 1.0 / abs(np.sin(phi))


def zeta_angle(zeta: complex) -> float:
    """arg ζ in [0, 2π)."""
    return float(np.mod(np.angle(complex(zeta)), 2 * np.pi))


def rho_flat(zeta: complex, c_flat: float) -> float:
    """ρ_♭(ζ) = c(ψ)² |ζ − c_♭|⁻² when |ζ − c_♭| < 1, c(ψ)² otherwise; ψ = arg(ζ − c_♭)."""
    shifted = complex(zeta) - c_flat
    if shifted.imag == 0.0 and shifted.real >= 0.0:
        raise ConfigError(f"zeta={zeta} lies on the ray [c_flat, inf) with c_flat={c_flat:g}")
    weight = c_phi(zeta_angle(shifted)) ** 2
    distance = abs(shifted)
    return weight / distance ** 2 if distance < 1.0 else weight


def estimate_c_flat(system_eff: DiscreteSystem, systems_osc: Sequence[DiscreteSystem]) -> float:
    """Common lower bound of the effective and oscillating operators relative
    to their Q₀ weights, less a 5% margin and floored at 0."""
    eigenvalues = [bottom_eigenvalue(system_eff)] + [bottom_eigenvalue(s) for s in systems_osc]
    lowest = min(eigenvalues)
    logger.info("Bottom eigenvalues: %s", ", ".join(f"{e:.6g}" for e in eigenvalues))
    return max(0.0, C_FLAT_SAFETY * lowest)


def c_flat_ceiling(coeffs: Coefficients, b: SymbolB, lambda_shift: float, box) -> float:
    """c₃ ‖Q₀⁻¹‖ μ₁⁰ with μ₁⁰ the first Dirichlet eigenvalue of −Δ + I on the box
    and c₃ the form bound from ‖g‖, ‖a_j‖, ‖Q‖, ‖Q₀‖."""
    lengths = np.array([hi - lo for lo, hi in box], dtype=float)
    mu = 1.0 + np.pi ** 2 * float(np.sum(1.0 / lengths ** 2))
    lower = sum(sup_norm(a_j) for a_j in coeffs.a)
    c3 = max(1.25 * b.alpha1 * sup_norm(coeffs.g) + 1.0 + lower,
             sup_norm(coeffs.Q) + lambda_shift * sup_norm(coeffs.Q0) + lower)
    return c3 * inverse_sup_norm(coeffs.Q0) * mu


# =============================================================================
# Error rows and norms
# =============================================================================

@dataclass(frozen=True)
class ErrorRow:
    epsilon: float
    zeta: complex
    phi: float
    err_l2: float
    err_h1_plain: float
    err_h1_corr: float
    err_h1_corr_nosmooth: float = math.nan
    err_h1_bl: float = math.nan
    err_h1_interior: float = math.nan
    err_flux: float = math.nan
    gap_l2: float = math.nan
    wallclock: float = 0.0

    def to_record(self, record_wallclock: bool = False) -> Dict[str, float]:
        record = {
            'epsilon': self.epsilon, 'zeta_re': self.zeta.real, 'zeta_im': self.zeta.imag, 'phi': self.phi,
        }
        for column in ERROR_COLUMNS:
            record[column] = getattr(self, column)
        record['wall_s'] = self.wallclock if record_wallclock else 0.0
        return record


@dataclass(frozen=True, eq=False)
class NormKit:
    """Mass and gradient matrices on O and on the inner box O'."""
    mesh: DomainMesh
    mass: sp.csr_matrix
    laplace: sp.csr_matrix
    mass_inner: Optional[sp.csr_matrix] = None
    laplace_inner: Optional[sp.csr_matrix] = None

    @classmethod
    def for_mesh(cls, mesh: DomainMesh, n: int) -> 'NormKit':
        mass, laplace = norm_matrices(mesh, n)
        inner = (None, None)
        if mesh.subdomain is not None:
            inner = norm_matrices(mesh, n, region=mesh.subdomain)
        return cls(mesh, mass, laplace, *inner)

    def l2(self, u) -> float:
        return l2_norm(u, self.mass)

    def h1(self, u) -> float:
        return h1_norm(u, self.mass, self.laplace)

    def h1_inner(self, u) -> float:
        if self.mass_inner is None:
            return math.nan
        return h1_norm(u, self.mass_inner, self.laplace_inner)


def solution_flux(u: np.ndarray, mesh: DomainMesh, coeffs: Coefficients, b: SymbolB, epsilon: float) -> np.ndarray:
    """p_ε = g^ε b(D)u at the quadrature points, shape (E, Q, m)."""
    grad = gradient_at_quadrature(mesh, np.asarray(u).reshape(mesh.n_nodes, b.n))
    b_u = np.einsum('jmn,eqjn->eqm', b.b_matrices, -1j * grad)
    points, _ = quadrature_points(mesh)
    g = oscillate(coeffs.g, epsilon, points.reshape(-1, mesh.dim)).reshape(b_u.shape[:2] + (b.m, b.m))
    return np.einsum('eqab,eqb->eqa', g, b_u)


def flux_l2(values: np.ndarray, mesh: DomainMesh) -> float:
    _, weights = quadrature_points(mesh)
    return float(np.sqrt(np.sum(weights[None, :, None] * np.abs(values) ** 2)))


def error_norms(u_eps: SolveResult, u0: SolveResult, corrector: CorrectorOutput, mesh: DomainMesh,
                norms: Optional[NormKit] = None, flux_exact: Optional[np.ndarray] = None,
                w: Optional[SolveResult] = None, corrector_nosmooth: Optional[CorrectorOutput] = None,
                gap: float = math.nan, wallclock: float = 0.0) -> ErrorRow:
    """Discrete L² and H¹ errors of u₀, v_ε and v_ε − w_ε against u_ε on one mesh."""
    n = u_eps.u.shape[-1]
    if u_eps.u.shape != u0.u.shape or u_eps.u.shape[0] != mesh.n_nodes:
        raise ConfigError("Solutions live on different meshes")
    if corrector.v_eps.shape != u_eps.u.shape:
        raise ConfigError("Corrector does not match the solution mesh")
    norms = norms or NormKit.for_mesh(mesh, n)
    diff_plain = u_eps.u - u0.u
    diff_corr = u_eps.u - corrector.v_eps
    row = dict(
        epsilon=float(u_eps.epsilon), zeta=complex(u_eps.zeta), phi=zeta_angle(u_eps.zeta),
        err_l2=norms.l2(diff_plain), err_h1_plain=norms.h1(diff_plain), err_h1_corr=norms.h1(diff_corr),
        err_h1_interior=norms.h1_inner(diff_corr), gap_l2=float(gap), wallclock=float(wallclock),
    )
    if corrector_nosmooth is not None:
        row['err_h1_corr_nosmooth'] = norms.h1(u_eps.u - corrector_nosmooth.v_eps)
    if w is not None:
        row['err_h1_bl'] = norms.h1(diff_corr + w.u)
    if flux_exact is not None:
        row['err_flux'] = flux_l2(flux_exact - corrector.flux, mesh)
    return ErrorRow(**row)


# =============================================================================
# Loads
# =============================================================================

def smooth_load(mesh: DomainMesh, n: int, seed: int, modes: int = LOAD_MODES) -> np.ndarray:
    """Seeded smooth load: Σ_k c_k Π_j cos(π k_j (x_j − lo_j)/L_j), k in {0..modes}^d,
    complex normal c_k damped by (1 + |k|²)⁻¹."""
    rng = np.random.default_rng(seed)
    coords = mesh.coords
    scaled = (coords - mesh.lower) / (mesh.upper - mesh.lower)
    waves = np.stack(np.meshgrid(*([np.arange(modes + 1)] * mesh.dim), indexing='ij'), axis=-1).reshape(-1, mesh.dim)
    coef = (rng.standard_normal((len(waves), n)) + 1j * rng.standard_normal((len(waves), n)))
    coef /= (1.0 + np.sum(waves ** 2, axis=1))[:, None]
    basis = np.prod(np.cos(np.pi * scaled[:, None, :] * waves[None, :, :]), axis=-1)
    return basis @ coef


# =============================================================================
# Sweeps
# =============================================================================

@dataclass
class SweepLevel:
    """Everything built once per ε."""
    epsilon: float
    mesh: DomainMesh
    system_osc: DiscreteSystem
    system_eff: DiscreteSystem
    norms: NormKit
    load: np.ndarray


@dataclass
class SweepResult:
    rows: List[ErrorRow]
    c_flat: Optional[float] = None
    cell: Optional[CellSolution] = None
    effective: Optional[EffectiveOperator] = None
    meta: Dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class PointResult:
    """One (ε, ζ) point: its ErrorRow plus the fields it was measured on."""
    row: ErrorRow
    mesh: DomainMesh
    u_eps: SolveResult
    u0: SolveResult
    corrector: CorrectorOutput
    w: Optional[SolveResult] = None


def _mesh_for(problem, epsilon: float, ratio: int, interior_margin: Optional[float]) -> DomainMesh:
    h = epsilon / ratio
    margin = None
    if interior_margin is not None:
        shortest = min(hi - lo for lo, hi in problem.box)
        margin = round(interior_margin * shortest / h) * h
    return build_mesh(problem.box, h, margin)


def _prepare_level(problem, coeffs, b, effective, epsilon, ratio, interior_margin, seed) -> SweepLevel:
    started = time.perf_counter()
    mesh = _mesh_for(problem, epsilon, ratio, interior_margin)
    system_osc = assemble_oscillating(mesh, coeffs, b, epsilon, effective.lambda_shift)
    system_eff = assemble_effective(mesh, effective)
    level = SweepLevel(epsilon=epsilon, mesh=mesh, system_osc=system_osc, system_eff=system_eff,
                       norms=NormKit.for_mesh(mesh, b.n), load=smooth_load(mesh, b.n, seed))
    logger.info("eps=%g: %d nodes assembled in %.2fs", epsilon, mesh.n_nodes, time.perf_counter() - started)
    return level


def resolvent_gap(solver_osc, solver_eff, level: SweepLevel, n: int, samples: int, seed: int) -> float:
    """max over seeded loads F of ‖(B_ε − ζQ₀^ε)⁻¹F − (B⁰ − ζQ̄₀)⁻¹F‖ / ‖F‖."""
    worst = 0.0
    for k in range(samples):
        load = smooth_load(level.mesh, n, seed + 1 + k)
        norm = level.norms.l2(load)
        if norm == 0.0:
            continue
        gap = level.norms.l2(solver_osc.solve(load).u - solver_eff.solve(load).u) / norm
        worst = max(worst, gap)
    return worst


def _run_point(level: SweepLevel, zeta: complex, cell: CellSolution, coeffs: Coefficients, b: SymbolB,
               settings: Dict) -> PointResult:
    started = time.perf_counter()
    allow_real = settings['mode'] == 'rho-flat'
    mesh, epsilon = level.mesh, level.epsilon
    solver_osc = factorize(level.system_osc, zeta, allow_real)
    solver_eff = factorize(level.system_eff, zeta, allow_real)
    u_eps = solver_osc.solve(level.load)
    u0 = solver_eff.solve(level.load)

    nosmooth = None
    if not settings['corrector']:
        corr = zeroth_order_approx(u0.u, cell, epsilon, mesh, zeta)
    elif settings['smoothing']:
        corr = first_order_approx(u0.u, cell, epsilon, mesh, zeta)
        nosmooth = corrector_no_smoothing(u0.u, cell, epsilon, mesh, zeta)
    else:
        corr = corrector_no_smoothing(u0.u, cell, epsilon, mesh, zeta)
        nosmooth = corr

    w = None
    if settings['boundary_layer']:
        reuse = corr if corr.smoothing else None
        phi, _, mu = boundary_corrector_trace(u0.u, cell, epsilon, mesh, corrector=reuse)
        logger.debug("eps=%g: cutoff slope mu=%.3f", epsilon, mu)
        w = solve_boundary_layer(mesh, coeffs, b, epsilon, level.system_osc.lambda_shift, zeta, phi,
                                 system=level.system_osc, allow_real=allow_real)
    gap = resolvent_gap(solver_osc, solver_eff, level, b.n, settings['gap_samples'], settings['seed'])
    flux_exact = solution_flux(u_eps.u, mesh, coeffs, b, epsilon)
    elapsed = time.perf_counter() - started
    logger.info("eps=%g zeta=%s solved in %.2fs", epsilon, zeta, elapsed)
    row = error_norms(u_eps, u0, corr, mesh, norms=level.norms, flux_exact=flux_exact, w=w,
                      corrector_nosmooth=nosmooth, gap=gap, wallclock=elapsed)
    return PointResult(row=row, mesh=mesh, u_eps=u_eps, u0=u0, corrector=corr, w=w)


def _run_level(level: SweepLevel, zetas: Sequence[complex], cell, coeffs, b, settings) -> List[ErrorRow]:
    rows = []
    for zeta in zetas:
        try:
            rows.append(_run_point(level, zeta, cell, coeffs, b, settings).row)
        except HomogError as exc:
            raise annotate(exc, level.epsilon, complex(zeta)) from exc
    return rows


def solve_point(problem, epsilon: float, zeta: complex, *, cell_n: Optional[int] = None, ratio: int = 16,
                smoothing: bool = True, boundary_layer: bool = False, interior_margin: Optional[float] = None,
                corrector: bool = True, gap_samples: int = 0, seed: int = 0, allow_real: bool = False,
                cell_solution: Optional[Tuple[CellSolution, EffectiveOperator]] = None) -> PointResult:
    """The sweep pipeline at a single (ε, ζ), keeping u_ε, u₀, v_ε and w_ε."""
    coeffs = problem.sample(cell_n or CELL_N_DEFAULTS[problem.dim])
    b = problem.symbol()
    cell, effective = cell_solution or solve_cell_coefficients(coeffs, b)
    level = _prepare_level(problem, coeffs, b, effective, float(epsilon), ratio, interior_margin, seed)
    settings = dict(smoothing=smoothing, boundary_layer=boundary_layer, corrector=corrector,
                    mode='rho-flat' if allow_real else 'standard', gap_samples=gap_samples, seed=seed)
    try:
        return _run_point(level, complex(zeta), cell, coeffs, b, settings)
    except HomogError as exc:
        raise annotate(exc, float(epsilon), complex(zeta)) from exc


def sort_rows(rows: Sequence[ErrorRow]) -> List[ErrorRow]:
    return sorted(rows, key=lambda r: (r.epsilon, r.zeta.real, r.zeta.imag))


def run_sweep(problem, eps_grid: Sequence[float], zeta_grid: Sequence[complex], *, cell_n: Optional[int] = None,
              ratio: int = 16, smoothing: bool = True, boundary_layer: bool = False,
              interior_margin: Optional[float] = None, corrector: bool = True, mode: str = 'standard',
              gap_samples: int = 5, seed: int = 0, jobs: int = 1,
              cell_solution: Optional[Tuple[CellSolution, EffectiveOperator]] = None) -> SweepResult:
    """Solve, correct and measure at every (ε, ζ).

    Args:
        problem: ProblemSpec (d <= 2)
        eps_grid: ε values, each 1/K
        zeta_grid: ζ values; in 'rho-flat' mode real offsets from the estimated c_♭
        cell_n: Cell grid resolution (default 1024 in 1D, 64 in 2D)
        ratio: ε/h, at least 16
        interior_margin: Fraction of the shortest box edge kept away from ∂O for O'
        jobs: Number of ε levels processed concurrently

    Returns:
        SweepResult with rows sorted by ε then ζ
    """
    if mode not in ('standard', 'rho-flat'):
        raise ConfigError(f"Unknown sweep mode {mode!r}")
    if not len(eps_grid) or not len(zeta_grid):
        return SweepResult(rows=[])
    if problem.dim > 2:
        raise ConfigError("Boundary-value sweeps need d <= 2")
    started = time.perf_counter()
    n_grid = cell_n or CELL_N_DEFAULTS[problem.dim]
    coeffs = problem.sample(n_grid)
    b = problem.symbol()
    cell, effective = cell_solution or solve_cell_coefficients(coeffs, b)
    settings = dict(smoothing=smoothing, boundary_layer=boundary_layer, corrector=corrector, mode=mode,
                    gap_samples=gap_samples, seed=seed)

    def prepare(epsilon):
        return _prepare_level(problem, coeffs, b, effective, float(epsilon), ratio, interior_margin, seed)

    epsilons = sorted({float(e) for e in eps_grid}, reverse=True)
    zetas = [complex(z) for z in zeta_grid]
    c_flat = None
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        if mode == 'rho-flat':
            levels = list(pool.map(prepare, epsilons))
            finest = min(levels, key=lambda lv: lv.epsilon)
            c_flat = estimate_c_flat(finest.system_eff, [lv.system_osc for lv in levels])
            ceiling = c_flat_ceiling(coeffs, b, effective.lambda_shift, problem.box)
            logger.info("c_flat=%.6g (ceiling %.6g)", c_flat, ceiling)
            if c_flat > ceiling:
                logger.warning("Estimated c_flat %.6g exceeds the ceiling %.6g", c_flat, ceiling)
            zetas = [complex(c_flat + z.real, 0.0) for z in zetas]
            groups = pool.map(lambda lv: _run_level(lv, zetas, cell, coeffs, b, settings), levels)
        else:
            groups = pool.map(lambda e: _run_level(prepare(e), zetas, cell, coeffs, b, settings), epsilons)
        rows = [row for group in groups for row in group]
    logger.info("Sweep of %d points finished in %.1fs", len(rows), time.perf_counter() - started)
    meta = {'model': problem.name, 'mode': mode, 'c_flat': c_flat, 'lambda_shift': effective.lambda_shift,
            'cell_n': n_grid, 'ratio': ratio, 'seed': seed}
    return SweepResult(rows=sort_rows(rows), c_flat=c_flat, cell=cell, effective=effective, meta=meta)


# =============================================================================
# Fits and criteria
# =============================================================================

def fit_slope(eps: Sequence[float], errors: Sequence[float]) -> Tuple[float, float]:
    """Least-squares (slope, intercept) of log err against log ε."""
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(eps) < MIN_FIT_POINTS:
        raise InsufficientPointsError(f"Slope fit needs at least {MIN_FIT_POINTS} epsilon points, got {len(eps)}")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ConfigError("Slope fit needs positive finite errors")
    slope, intercept = np.polyfit(np.log(eps), np.log(errors), 1)
    return float(slope), float(intercept)


@dataclass
class RateReport:
    slopes: Dict[str, List[Dict]]
    zeta_diagnostics: Dict[str, Dict]
    criteria: List[Dict]
    c_flat: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c['passed'] for c in self.criteria)

    @property
    def failed(self) -> List[str]:
        return [c['name'] for c in self.criteria if not c['passed']]

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['passed'] = self.passed
        return data


def _zeta_key(zeta: complex) -> Tuple[float, float]:
    return round(zeta.real, 12), round(zeta.imag, 12)


def _column(row: ErrorRow, column: str) -> float:
    if column == 'smoothing_gap':
        return abs(row.err_h1_corr - row.err_h1_corr_nosmooth)
    return getattr(row, column)


def _column_fits(rows: Sequence[ErrorRow], column: str) -> List[Dict]:
    """One fit per ζ over ε; 'exact' when every error is below EXACT_TOL."""
    groups: Dict[Tuple[float, float], List[ErrorRow]] = {}
    for row in rows:
        groups.setdefault(_zeta_key(row.zeta), []).append(row)
    fits = []
    for key, group in sorted(groups.items()):
        group = sorted(group, key=lambda r: r.epsilon)
        eps = [r.epsilon for r in group]
        errors = np.array([_column(r, column) for r in group])
        entry = {'zeta': list(key), 'points': len(group), 'slope': None, 'intercept': None, 'status': 'fit'}
        if np.all(np.isnan(errors)):
            entry['status'] = 'missing'
        elif np.all(errors < EXACT_TOL):
            entry['status'] = 'exact'
        else:
            entry['slope'], entry['intercept'] = fit_slope(eps, errors)
        fits.append(entry)
    return fits


def _rate_criterion(column: str, lower: Optional[float] = None, upper: Optional[float] = None):
    def judge(rows, params, context):
        lo = params.get('threshold', params.get('min', lower))
        hi = params.get('max', upper)
        fits = _column_fits(rows, column)
        context['slopes'][column] = fits
        verdicts = []
        for fit in fits:
            if fit['status'] == 'missing':
                verdicts.append(False)
            elif fit['status'] == 'exact':
                verdicts.append(hi is None)
            else:
                ok = (lo is None or fit['slope'] >= lo) and (hi is None or fit['slope'] <= hi)
                verdicts.append(ok)
        slopes = [f['slope'] for f in fits]
        return {'passed': bool(verdicts) and all(verdicts), 'value': slopes, 'threshold': [lo, hi],
                'detail': [f['status'] for f in fits]}
    return judge


def _spread_groups(rows, weight: Callable[[ErrorRow], float], key: Callable[[ErrorRow], Tuple]) -> Dict[str, Dict]:
    groups: Dict[Tuple, List[ErrorRow]] = {}
    for row in rows:
        groups.setdefault(key(row), []).append(row)
    out = {}
    for group_key, group in sorted(groups.items()):
        if len(group) < 2:
            continue
        values = np.array([row.err_l2 / weight(row) for row in group])
        if np.all(values < EXACT_TOL):
            ratio = 1.0
        else:
            ratio = float(values.max() / values.min()) if values.min() > 0 else math.inf
        out[str(group_key)] = {'values': values.tolist(), 'ratio': ratio}
    return out


def _zeta_scaling(rows, params, context):
    """err_l2 |ζ|^{1/2} bounded along each ray: max/min <= 4 at fixed ε and φ."""
    limit = params.get('threshold', SCALING_RATIO)
    groups = _spread_groups(rows, lambda r: abs(r.zeta) ** -0.5,
                            lambda r: (r.epsilon, round(r.phi, 9)))
    context['zeta_diagnostics']['zeta_scaling'] = groups
    ratios = [g['ratio'] for g in groups.values()]
    return {'passed': bool(ratios) and max(ratios) <= limit, 'value': ratios, 'threshold': limit,
            'detail': 'no ray with two or more |zeta| values' if not ratios else ''}


def _rho_flat_scaling(rows, params, context):
    """err_l2 / ρ_♭(ζ) roughly constant across ζ at fixed ε: max/min <= 4."""
    limit = params.get('threshold', SCALING_RATIO)
    c_flat = params.get('c_flat', context.get('c_flat'))
    if c_flat is None:
        return {'passed': False, 'value': None, 'threshold': limit, 'detail': 'c_flat unknown'}
    groups = _spread_groups(rows, lambda r: rho_flat(r.zeta, c_flat), lambda r: (r.epsilon,))
    context['zeta_diagnostics']['rho_flat_scaling'] = groups
    ratios = [g['ratio'] for g in groups.values()]
    return {'passed': bool(ratios) and max(ratios) <= limit, 'value': ratios, 'threshold': limit,
            'detail': f'c_flat={c_flat:.6g}'}


def _improved_phi(rows, params, context):
    """Error at φ = π/3 against φ = π at equal |ζ| and ε: ratio <= 4 c(π/3)²."""
    target = params.get('phi', np.pi / 3)
    limit = params.get('threshold', SCALING_RATIO * c_phi(target) ** 2)
    by_key: Dict[Tuple, Dict[str, float]] = {}
    for row in rows:
        key = (row.epsilon, round(abs(row.zeta), 9))
        if abs(row.phi - target) < 1e-9:
            by_key.setdefault(key, {})['tilted'] = row.err_l2
        elif abs(row.phi - np.pi) < 1e-9:
            by_key.setdefault(key, {})['axis'] = row.err_l2
    ratios = []
    for key, pair in sorted(by_key.items()):
        if 'tilted' in pair and 'axis' in pair and pair['axis'] > 0:
            ratios.append(pair['tilted'] / pair['axis'])
    context['zeta_diagnostics']['improved_phi'] = {'ratios': ratios}
    return {'passed': bool(ratios) and max(ratios) <= limit, 'value': ratios, 'threshold': limit,
            'detail': '' if ratios else 'no matching (pi/3, pi) pairs'}


CRITERIA: Dict[str, Callable] = {
    'l2_rate': _rate_criterion('err_l2', 0.9, 1.1),
    'h1_corr_rate': _rate_criterion('err_h1_corr', 0.45),
    'h1_plain_stalls': _rate_criterion('err_h1_plain', None, 0.2),
    'h1_plain_rate': _rate_criterion('err_h1_plain', 0.9),
    'h1_bl_rate': _rate_criterion('err_h1_bl', 0.9),
    'h1_interior_rate': _rate_criterion('err_h1_interior', 0.9),
    'flux_rate': _rate_criterion('err_flux', 0.45),
    'smoothing_removal': _rate_criterion('smoothing_gap', 0.9),
    'zeta_scaling': _zeta_scaling,
    'rho_flat_scaling': _rho_flat_scaling,
    'improved_phi': _improved_phi,
}


def default_criteria(n_eps: int, mode: str = 'standard', boundary_layer: bool = False,
                     interior: bool = False) -> List[str]:
    if mode == 'rho-flat':
        return ['rho_flat_scaling']
    if n_eps < MIN_FIT_POINTS:
        return ['zeta_scaling']
    names = ['l2_rate', 'h1_corr_rate']
    if boundary_layer:
        names.append('h1_bl_rate')
    if interior:
        names.append('h1_interior_rate')
    return names


def fit_and_judge(rows: Sequence[ErrorRow], criteria: Optional[Sequence[Union[str, Dict]]] = None,
                  c_flat: Optional[float] = None) -> RateReport:
    """Fit log-log slopes and judge each criterion (name or {"name": ..., "threshold": ...})."""
    rows = list(rows)
    if criteria is None:
        criteria = default_criteria(len({r.epsilon for r in rows}))
    context = {'slopes': {}, 'zeta_diagnostics': {}, 'c_flat': c_flat}
    results = []
    for criterion in criteria:
        params = {'name': criterion} if isinstance(criterion, str) else dict(criterion)
        name = params.get('name')
        if name not in CRITERIA:
            raise ConfigError(f"Unknown criterion {name!r}; expected one of {sorted(CRITERIA)}")
        outcome = CRITERIA[name](rows, params, context)
        outcome['name'] = name
        results.append(outcome)
        logger.info("criterion %s: %s", name, 'PASS' if outcome['passed'] else 'FAIL')
    for column in ERROR_COLUMNS:
        if column not in context['slopes'] and len({r.epsilon for r in rows}) >= MIN_FIT_POINTS:
            values = [getattr(r, column) for r in rows]
            if not all(np.isnan(values)):
                context['slopes'][column] = _column_fits(rows, column)
    return RateReport(slopes=context['slopes'], zeta_diagnostics=context['zeta_diagnostics'],
                      criteria=results, c_flat=c_flat)


# =============================================================================
# Tables and reports
# =============================================================================

def rows_to_frame(rows: Sequence[ErrorRow], record_wallclock: bool = False) -> pd.DataFrame:
    records = [row.to_record(record_wallclock) for row in sort_rows(rows)]
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)


def write_csv(rows: Sequence[ErrorRow], path: str, record_wallclock: bool = False) -> str:
    frame = rows_to_frame(rows, record_wallclock)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def read_csv(path: str) -> List[ErrorRow]:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as exc:
        raise ConfigError(f"Cannot read sweep table {path}: {exc}") from exc
    if list(frame.columns) != CSV_COLUMNS:
        raise ConfigError(f"{path} does not have the sweep header {','.join(CSV_COLUMNS)}")
    rows = []
    for record in frame.to_dict(orient='records'):
        zeta = complex(record['zeta_re'], record['zeta_im'])
        values = {column: float(record[column]) for column in ERROR_COLUMNS}
        rows.append(ErrorRow(epsilon=float(record['epsilon']), zeta=zeta, phi=float(record['phi']),
                             wallclock=float(record['wall_s']), **values))
    return rows


def write_report(report: RateReport, path: str) -> str:
    return write_json(path, report.to_dict())
