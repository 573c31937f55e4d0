#!/usr/bin/env python3
"""
Periodic homogenization: cell solves, effective operators, Dirichlet
solves at complex ζ and (ε, ζ) rate verification.

Usage:
    python3 homogenize.py cell --model scalar-1d-sine
    python3 homogenize.py effective --model magnetic-1d
    python3 homogenize.py solve --model scalar-1d-sine --eps 32 --zeta-re -1
    python3 homogenize.py sweep --config configs/reference_1d.json --jobs 4
    python3 homogenize.py verify --config configs/reference_2d.json
    python3 homogenize.py report --csv results/reference_1d/sweep.csv --criteria l2_rate,h1_corr_rate

Exit codes: 0 success, 1 configuration error, 2 solver error, 3 criteria failed.
"""

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from homog.cell_solver import cell_norm_bounds, effective_magnetic_form, laminate_drift, solve_cell
from homog.config import RunConfig, load_run_config
from homog.errors import ConfigError, CriteriaError, HomogError
from homog.field_specs import format_complex
from homog.io_utils import (
    cell_solution_to_dict, effective_to_dict, nodal_to_dict, read_json, solve_result_to_dict, write_json,
)
from homog.model_zoo import check_known_effective
from homog.verify_harness import (
    CSV_COLUMNS, ErrorRow, RateReport, default_criteria, fit_and_judge, read_csv, run_sweep, solve_point,
    write_csv, write_report,
)
from model_registry import resolve_model

logger = logging.getLogger('homogenize')

COMMANDS = ('cell', 'effective', 'solve', 'sweep', 'verify', 'report')


# =============================================================================
# Console output
# =============================================================================

def banner(title: str) -> None:
    print(f"\n{'=' * 60}")
    print(title)
    print('=' * 60)


def section(number: int, title: str) -> None:
    print(f"\n{number}. {title}")
    print("-" * 40)


def format_matrix(mat: np.ndarray, indent: str = '    ') -> str:
    mat = np.atleast_2d(mat)
    real = np.max(np.abs(mat.imag)) <= 1e-14 if mat.size else True
    rows = []
    for row in mat:
        cells = [f"{v.real: .10g}" if real else f"{v.real: .6g}{v.imag:+.6g}j" for v in row]
        rows.append(indent + '[' + ', '.join(cells) + ']')
    return '\n'.join(rows)


def print_row(row: ErrorRow) -> None:
    print(f"  epsilon = {row.epsilon:.6g}, zeta = {format_complex(row.zeta)}, phi = {row.phi:.6f}")
    for column in CSV_COLUMNS[4:12]:
        print(f"    {column:<22} {getattr(row, column):.6e}")


def print_report(report: RateReport) -> None:
    for column, fits in report.slopes.items():
        for fit in fits:
            slope = f"{fit['slope']:.4f}" if fit['slope'] is not None else fit['status']
            print(f"  {column:<22} zeta=({fit['zeta'][0]:g}, {fit['zeta'][1]:g})  slope {slope}")
    if report.c_flat is not None:
        print(f"  c_flat = {report.c_flat:.6g}")
    print()
    for criterion in report.criteria:
        tag = 'OK' if criterion['passed'] else 'FAIL'
        print(f"  [{tag}] {criterion['name']}: value {criterion['value']} threshold {criterion['threshold']}")


# =============================================================================
# Commands
# =============================================================================

def _model_stem(config: RunConfig) -> str:
    return config.model_name.replace(os.sep, '_')


def cmd_cell(config: RunConfig, args) -> int:
    """Solve both cell problems and write the CellSolution."""
    problem = resolve_model(config.model)
    n_grid = config.cell_grid(problem.dim)
    banner(f"Cell problems: {problem.name} (d={problem.dim}, N={n_grid})")
    cell, effective = solve_cell(problem, n_grid)

    section(1, "Effective matrix g0")
    print(format_matrix(cell.g0))
    if problem.known_effective is not None:
        error = float(np.max(np.abs(cell.g0 - problem.known_effective_matrix)))
        print(f"  known value deviation: {error:.3e}")
        bracketed = check_known_effective(problem, n_grid)
        print(f"  [{'OK' if bracketed else 'WARN'}] known value inside the Voigt-Reuss bracket")
    if cell.g.piecewise and n_grid >= 8:
        drift = laminate_drift(problem.sample(n_grid).g, problem.sample(n_grid // 2).g, problem.symbol())
        print(f"  [{'OK' if drift <= 1e-4 else 'WARN'}] resolution drift N/2 -> N: {drift:.2e}")

    section(2, "Lower-order cell quantities")
    print("  V =")
    print(format_matrix(cell.V))
    print("  W =")
    print(format_matrix(cell.W))
    print(f"  lambda shift: {effective.lambda_shift:g}")
    print(f"  residuals: Lambda {cell.residuals[0]:.2e}, Lambda~ {cell.residuals[1]:.2e}")
    print(f"  zero corrector: {cell.is_zero_corrector}")
    for name, (value, bound) in cell_norm_bounds(cell, problem.sample(n_grid).a).items():
        print(f"  |{name}| = {value:.4e}  (bound {bound:.4e})")

    path = args.out or os.path.join(config.out_dir, f"{_model_stem(config)}_cell.json")
    write_json(path, cell_solution_to_dict(cell, effective, model=problem.name))
    print(f"\nWrote {path}")
    return 0


def cmd_effective(config: RunConfig, args) -> int:
    """Assemble and print the effective operator B0 and its symbol bounds."""
    problem = resolve_model(config.model)
    n_grid = config.cell_grid(problem.dim)
    banner(f"Effective operator: {problem.name}")
    cell, effective = solve_cell(problem, n_grid)

    section(1, "Coefficients")
    print("  g0 =")
    print(format_matrix(effective.g0))
    for j, a_j in enumerate(effective.a_mean, start=1):
        print(f"  mean(a_{j} + a_{j}*) =")
        print(format_matrix(a_j))
    print("  mean Q - W =")
    print(format_matrix(effective.Q_mean - effective.W))
    print("  mean Q0 =")
    print(format_matrix(effective.Q0_mean))
    print(f"  lambda = {effective.lambda_shift:g}")

    section(2, "Symbol bounds")
    print(f"  c_* = {effective.c_star:.6g}  (lower estimate {effective.c_star_bound:.6g})")
    print(f"  C_L = {effective.C_L:.6g}")

    data = effective_to_dict(effective)
    magnetic = problem.sample_magnetic(n_grid)
    if magnetic is not None:
        section(3, "Effective magnetic form")
        form = effective_magnetic_form(effective, cell.g, *magnetic)
        print(f"  A0 = {np.array2string(form['A0'], precision=8)}")
        print(f"  V0 = {form['V0']:.8g}")
        data['magnetic'] = {'A0': form['A0'].tolist(), 'V0': form['V0']}

    path = args.out or os.path.join(config.out_dir, f"{_model_stem(config)}_effective.json")
    write_json(path, data)
    print(f"\nWrote {path}")
    return 0


def cmd_solve(config: RunConfig, args) -> int:
    """Single (ε, ζ): write u_ε, u₀, v_ε (and w_ε) and print the ErrorRow."""
    if not config.eps_inverse or not config.zeta_grid:
        raise ConfigError("solve needs one epsilon (--eps) and one zeta (--zeta-re/--zeta-im)")
    problem = resolve_model(config.model)
    epsilon, zeta = config.eps_grid[0], config.zeta_grid[0]
    banner(f"Dirichlet solve: {problem.name}, eps={epsilon:g}, zeta={format_complex(zeta)}")
    point = solve_point(problem, epsilon, zeta, cell_n=config.cell_n, ratio=config.ratio,
                        smoothing=config.smoothing, boundary_layer=config.boundary_layer,
                        interior_margin=config.interior_margin, corrector=config.corrector,
                        gap_samples=config.gap_samples, seed=config.seed)
    print_row(point.row)

    stem = os.path.join(args.out or config.out_dir, f"{_model_stem(config)}_eps{config.eps_inverse[0]}")
    mesh = point.mesh
    written = [write_json(f"{stem}_u_eps.json", solve_result_to_dict(point.u_eps, mesh)),
               write_json(f"{stem}_u0.json", solve_result_to_dict(point.u0, mesh))]
    v_data = nodal_to_dict('first-order', point.corrector.v_eps, mesh)
    v_data['smoothing'] = point.corrector.smoothing
    written.append(write_json(f"{stem}_v_eps.json", v_data))
    if point.w is not None:
        written.append(write_json(f"{stem}_w_eps.json", solve_result_to_dict(point.w, mesh)))
    print()
    for path in written:
        print(f"Wrote {path}")
    return 0


def _sweep(config: RunConfig):
    problem = resolve_model(config.model)
    print(f"Model: {problem.name}  eps: {[f'1/{k}' for k in config.eps_inverse]}  "
          f"zeta: {[format_complex(z) for z in config.zeta_grid]}  mode: {config.mode}")
    return run_sweep(problem, config.eps_grid, config.zeta_grid, cell_n=config.cell_n, ratio=config.ratio,
                     smoothing=config.smoothing, boundary_layer=config.boundary_layer,
                     interior_margin=config.interior_margin, corrector=config.corrector, mode=config.mode,
                     gap_samples=config.gap_samples, seed=config.seed, jobs=config.jobs)


def _csv_path(config: RunConfig, args) -> str:
    return args.csv or os.path.join(config.out_dir, 'sweep.csv')


def _meta_path(csv_path: str) -> str:
    return os.path.splitext(csv_path)[0] + '_meta.json'


def cmd_sweep(config: RunConfig, args) -> int:
    """Run the (ε, ζ) sweep and write the CSV table."""
    banner("Sweep")
    result = _sweep(config)
    path = _csv_path(config, args)
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    write_csv(result.rows, path, config.record_wallclock)
    write_json(_meta_path(path), dict(result.meta, config=config.to_dict()))
    for row in result.rows:
        print_row(row)
    print(f"\nWrote {path} ({len(result.rows)} rows)")
    return 0


def _criteria(config: RunConfig, n_eps: int) -> List:
    if config.criteria is not None:
        return list(config.criteria)
    return default_criteria(n_eps, config.mode, config.boundary_layer, config.interior_margin is not None)


def _judge(rows, config: RunConfig, c_flat: Optional[float], report_path: str) -> int:
    report = fit_and_judge(rows, _criteria(config, len({r.epsilon for r in rows})), c_flat=c_flat)
    write_report(report, report_path)
    print_report(report)
    print(f"\nWrote {report_path}")
    banner("PASS" if report.passed else f"FAIL: {', '.join(report.failed)}")
    if not report.passed:
        raise CriteriaError(f"Criteria failed: {', '.join(report.failed)}")
    return 0


def cmd_verify(config: RunConfig, args) -> int:
    """Sweep, fit and judge; exit 3 when any criterion fails."""
    banner("Verify")
    result = _sweep(config)
    path = _csv_path(config, args)
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    write_csv(result.rows, path, config.record_wallclock)
    write_json(_meta_path(path), dict(result.meta, config=config.to_dict()))
    print(f"Wrote {path} ({len(result.rows)} rows)")
    return _judge(result.rows, config, result.c_flat, os.path.join(os.path.dirname(path), 'report.json'))


def cmd_report(config: RunConfig, args) -> int:
    """Re-judge an existing sweep CSV."""
    path = _csv_path(config, args)
    banner(f"Report: {path}")
    rows = read_csv(path)
    c_flat = config.c_flat
    if c_flat is None and os.path.exists(_meta_path(path)):
        c_flat = read_json(_meta_path(path)).get('c_flat')
    return _judge(rows, config, c_flat, args.out or os.path.join(os.path.dirname(path), 'report.json'))


HANDLERS = {
    'cell': cmd_cell,
    'effective': cmd_effective,
    'solve': cmd_solve,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
    'report': cmd_report,
}


# =============================================================================
# Arguments
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Periodic homogenization toolkit')
    parser.add_argument('command', choices=COMMANDS, help='What to run')
    parser.add_argument('--model', type=str, help='Registered model name or path to a model JSON')
    parser.add_argument('--config', type=str, help='Run configuration JSON')
    parser.add_argument('--eps', type=float, nargs='+', help='epsilon values as K (eps = 1/K) or 1/K floats')
    parser.add_argument('--zeta-re', type=float, help='Real part of zeta')
    parser.add_argument('--zeta-im', type=float, help='Imaginary part of zeta')
    parser.add_argument('--phi', type=float, help='Ray angle of the zeta grid')
    parser.add_argument('--mags', type=float, nargs='+', help='|zeta| values along --phi')
    parser.add_argument('--cell-n', type=int, help='Cell grid resolution N')
    parser.add_argument('--ratio', type=int, help='Mesh ratio eps/h (>= 16)')
    parser.add_argument('--jobs', type=int, help='Concurrent epsilon levels')
    parser.add_argument('--out', type=str, help='Output file or directory')
    parser.add_argument('--csv', type=str, help='Sweep CSV path (sweep, verify, report)')
    parser.add_argument('--seed', type=int, help='Load seed')
    parser.add_argument('--no-smoothing', action='store_true', help='Corrector without Steklov smoothing')
    parser.add_argument('--no-corrector', action='store_true', help='Compare against u0 only')
    parser.add_argument('--boundary-layer', action='store_true', help='Also solve for w_eps')
    parser.add_argument('--interior-margin', type=float, help='Fraction of the shortest edge kept off the boundary')
    parser.add_argument('--mode', choices=('standard', 'rho-flat'), help='Spectral parameter mode')
    parser.add_argument('--criteria', type=str, help='Comma-separated criterion names')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    return parser


def overrides_from_args(args) -> Dict:
    """Flags that were given, as config keys; absent flags stay None."""
    zeta = None
    if args.phi is not None or args.mags is not None:
        if args.phi is None or args.mags is None:
            raise ConfigError("--phi and --mags go together")
        zeta = {'phi': args.phi, 'magnitudes': args.mags}
    elif args.zeta_re is not None or args.zeta_im is not None:
        zeta = [format_complex(complex(args.zeta_re or 0.0, args.zeta_im or 0.0))]
    return {
        'model': args.model,
        'eps_grid': args.eps,
        'zeta_grid': zeta,
        'cell_n': args.cell_n,
        'ratio': args.ratio,
        'jobs': args.jobs,
        'seed': args.seed,
        'smoothing': False if args.no_smoothing else None,
        'corrector': False if args.no_corrector else None,
        'boundary_layer': True if args.boundary_layer else None,
        'interior_margin': args.interior_margin,
        'mode': args.mode,
        'criteria': args.criteria.split(',') if args.criteria else None,
        'out_dir': args.out if args.out and args.command in ('sweep', 'verify') else None,
    }


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        config = load_run_config(args.config, overrides_from_args(args))
        return HANDLERS[args.command](config, args)
    except HomogError as exc:
        print(f"\nERROR: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == '__main__':
    sys.exit(main())
