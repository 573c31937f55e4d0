#!/usr/bin/env python3
"""
Export cell solutions and effective operators for every registered model.

Each model gets <output>/<model>_cell.json with g0, V, W, the residuals and
the effective operator. With --diff, a fresh export is compared against a
previous one (numerical tolerance on the effective quantities).

Usage:
    python3 scripts/export_cell_solutions.py                          # Export all to results/cells/
    python3 scripts/export_cell_solutions.py --output cells/          # Export to specific directory
    python3 scripts/export_cell_solutions.py --model laminate-13      # Export single model
    python3 scripts/export_cell_solutions.py --fields                 # Include Λ and Λ̃ grids
    python3 scripts/export_cell_solutions.py --diff results/cells_old # Compare against an earlier export
"""

import argparse
import json
import sys
from difflib import unified_diff
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from homog.cell_solver import solve_cell
from homog.config import CELL_N_DEFAULTS
from homog.errors import HomogError
from homog.io_utils import cell_solution_to_dict, decode_array, write_json
from model_registry import get_model_by_id, get_model_ids

DEFAULT_OUTPUT_DIR = Path(__file__).parent.parent / 'results' / 'cells'
COMPARED_KEYS = ('g0', 'V', 'W')
DIFF_TOL = 1e-8


def export_model(model_id: str, output_dir: Path, include_fields: bool = False) -> dict:
    problem = get_model_by_id(model_id)
    n_grid = CELL_N_DEFAULTS[problem.dim]
    cell, effective = solve_cell(problem, n_grid)
    path = output_dir / f"{model_id}_cell.json"
    write_json(str(path), cell_solution_to_dict(cell, effective, model=problem.name,
                                                include_fields=include_fields))
    return {'success': True, 'path': str(path), 'n_grid': n_grid, 'residual': max(cell.residuals)}


def export_all(output_dir: Path, single_model=None, include_fields=False, verbose=True):
    """
    Export every registered model's cell solution.

    Returns:
        Dict with export statistics
    """
    model_ids = get_model_ids()
    if single_model:
        if single_model not in model_ids:
            print(f"ERROR: model '{single_model}' not found in registry")
            return {'success': False, 'error': f'Model not found: {single_model}'}
        model_ids = [single_model]

    total = len(model_ids)
    exported = 0
    errors = []
    if verbose:
        print(f"Exporting {total} models to {output_dir}...")

    for i, model_id in enumerate(model_ids, 1):
        try:
            result = export_model(model_id, output_dir, include_fields)
            exported += 1
            if verbose:
                print(f"  [{i}/{total}] {model_id}: N={result['n_grid']}, residual {result['residual']:.1e}")
        except HomogError as e:
            errors.append({'model': model_id, 'error': str(e)})
            if verbose:
                print(f"  [{i}/{total}] {model_id}: ERROR - {e}")

    if verbose:
        print(f"\nExport complete:")
        print(f"  Models exported: {exported}/{total}")
        if errors:
            print(f"  Failed: {len(errors)}")

    return {'success': not errors, 'total': total, 'exported': exported, 'errors': errors}


def compare_cell_files(file1: Path, file2: Path) -> tuple:
    """
    Compare the effective quantities of two exports.

    Returns:
        Tuple of (are_equal: bool, diff_lines: list)
    """
    with open(file1, 'r', encoding='utf-8') as f:
        data1 = json.load(f)
    with open(file2, 'r', encoding='utf-8') as f:
        data2 = json.load(f)

    lines = []
    for key in COMPARED_KEYS:
        a, b = decode_array(data1[key]), decode_array(data2[key])
        if a.shape != b.shape:
            lines.append(f"{key}: shape {a.shape} vs {b.shape}")
        elif np.max(np.abs(a - b), initial=0.0) > DIFF_TOL:
            lines.append(f"{key}: max deviation {np.max(np.abs(a - b)):.2e}")
    if lines:
        summary1 = json.dumps({k: data1[k] for k in COMPARED_KEYS}, sort_keys=True, indent=2)
        summary2 = json.dumps({k: data2[k] for k in COMPARED_KEYS}, sort_keys=True, indent=2)
        lines += list(unified_diff(summary1.splitlines(), summary2.splitlines(),
                                   fromfile=str(file1), tofile=str(file2), lineterm=''))[:40]
    return not lines, lines


def diff_exports(export_dir: Path, previous_dir: Path, verbose=True):
    if verbose:
        print(f"\nComparing {export_dir} vs {previous_dir}...")

    exported_files = sorted(export_dir.glob('*_cell.json'))
    total = len(exported_files)
    matching = different = missing = 0

    for i, export_file in enumerate(exported_files, 1):
        model_id = export_file.stem.replace('_cell', '')
        previous_file = previous_dir / export_file.name
        if not previous_file.exists():
            missing += 1
            if verbose:
                print(f"  [{i}/{total}] {model_id}: MISSING previous")
            continue
        are_equal, diff = compare_cell_files(previous_file, export_file)
        if are_equal:
            matching += 1
        else:
            different += 1
            if verbose:
                print(f"  [{i}/{total}] {model_id}: DIFFERENT")
                for line in diff[:10]:
                    print(f"      {line}")

    if verbose:
        print(f"\nComparison Results:")
        print(f"  Matching: {matching}/{total}")
        print(f"  Different: {different}")
        print(f"  Missing previous: {missing}")

    return {'total': total, 'matching': matching, 'different': different, 'missing': missing}


def main():
    parser = argparse.ArgumentParser(description='Export cell solutions for the model registry')
    parser.add_argument('--output', '-o', type=str, default=str(DEFAULT_OUTPUT_DIR),
                        help='Output directory for exported files')
    parser.add_argument('--model', type=str, help='Export single model by ID')
    parser.add_argument('--fields', action='store_true', help='Include the cell solution grids')
    parser.add_argument('--diff', type=str, help='Compare against a previous export directory')
    parser.add_argument('--quiet', action='store_true', help='Suppress progress output')

    args = parser.parse_args()
    output_dir = Path(args.output)

    result = export_all(output_dir, single_model=args.model, include_fields=args.fields,
                        verbose=not args.quiet)

    if args.diff and result['success']:
        diff_results = diff_exports(output_dir, Path(args.diff), verbose=not args.quiet)
        if diff_results['different'] > 0:
            print(f"\nWARNING: {diff_results['different']} files have differences!")
            sys.exit(1)

    sys.exit(0 if result['success'] else 1)


if __name__ == '__main__':
    main()
