#!/usr/bin/env python3
"""
Model Zoo Validation Script

Runs consistency checks over every registered model:
1. Every model file builds into a valid ProblemSpec
2. Known effective matrices sit inside the Voigt-Reuss bracket
3. Cell solves reproduce the known effective matrices
4. Zero-corrector models have vanishing cell solutions
5. Specs round-trip through serialization
6. Magnetic models yield a finite effective magnetic form

Usage:
    python3 scripts/validate_models.py           # Run all checks
    python3 scripts/validate_models.py --quick   # Skip the 2D cell solves
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from homog.cell_solver import effective_magnetic_form, solve_cell
from homog.errors import HomogError
from homog.model_zoo import check_known_effective, problem_from_dict, problem_to_dict
from model_registry import get_model_by_id, get_model_ids

ORACLE_TOL = {1: 1e-8, 2: 1e-6}
CHECK_GRID = {1: 256, 2: 128}


def _load_models():
    models, failures = [], []
    for model_id in get_model_ids():
        try:
            models.append(get_model_by_id(model_id))
        except HomogError as exc:
            failures.append((model_id, str(exc)))
    return models, failures


def check_registry(models, failures):
    """Check that every model file builds."""
    print("\n1. Registry")
    print("-" * 40)
    for problem in models:
        print(f"   {problem.name}: d={problem.dim}, n={problem.n}, m={problem.m} [OK]")
    for model_id, message in failures:
        print(f"   {model_id}: {message} [FAIL]")
    return not failures


def check_brackets(models):
    """Check known effective matrices against the Voigt-Reuss bracket."""
    print("\n2. Voigt-Reuss Bracket")
    print("-" * 40)
    passed = True
    for problem in models:
        if problem.known_effective is None:
            continue
        ok = check_known_effective(problem)
        passed &= ok
        print(f"   {problem.name}: [{'OK' if ok else 'FAIL'}]")
    return passed


def check_oracles(models, quick):
    """Check cell-solver output against the closed-form effective matrices."""
    print("\n3. Effective Matrix Oracles")
    print("-" * 40)
    passed = True
    for problem in models:
        if problem.known_effective is None or problem.dim not in ORACLE_TOL:
            continue
        if quick and problem.dim > 1:
            print(f"   {problem.name}: skipped (quick mode)")
            continue
        cell, _ = solve_cell(problem, CHECK_GRID[problem.dim])
        error = float(np.max(np.abs(cell.g0 - problem.known_effective_matrix)))
        ok = error <= ORACLE_TOL[problem.dim]
        passed &= ok
        print(f"   {problem.name}: deviation {error:.2e} [{'OK' if ok else 'FAIL'}]")
    return passed


def check_zero_correctors(models):
    """Check that zero-corrector models have Λ = Λ̃ = 0."""
    print("\n4. Zero Correctors")
    print("-" * 40)
    passed = True
    for problem in models:
        if 'zero-corrector' not in problem.tags:
            continue
        cell, _ = solve_cell(problem, CHECK_GRID.get(problem.dim, 32) // 2)
        ok = cell.is_zero_corrector
        passed &= ok
        print(f"   {problem.name}: [{'OK' if ok else 'FAIL'}]")
    return passed


def check_round_trip(models):
    """Check that specs survive serialization."""
    print("\n5. Serialization Round Trip")
    print("-" * 40)
    passed = True
    for problem in models:
        data = problem_to_dict(problem)
        ok = problem_to_dict(problem_from_dict(data)) == data
        passed &= ok
        print(f"   {problem.name}: [{'OK' if ok else 'FAIL'}]")
    return passed


def check_magnetic(models):
    """Check the effective magnetic potential and potential of magnetic models."""
    print("\n6. Magnetic Models")
    print("-" * 40)
    passed = True
    for problem in models:
        if not problem.magnetic:
            continue
        n_grid = CHECK_GRID.get(problem.dim, 32)
        cell, effective = solve_cell(problem, n_grid)
        form = effective_magnetic_form(effective, cell.g, *problem.sample_magnetic(n_grid))
        ok = bool(np.all(np.isfinite(form['A0'])) and np.isfinite(form['V0']))
        passed &= ok
        print(f"   {problem.name}: A0={np.round(form['A0'], 8).tolist()} V0={form['V0']:.8g} "
              f"[{'OK' if ok else 'FAIL'}]")
    return passed


def main():
    print("=" * 60)
    print("Model Zoo Validation")
    print("=" * 60)

    quick_mode = '--quick' in sys.argv
    models, failures = _load_models()

    results = []
    results.append(("Registry", check_registry(models, failures)))
    results.append(("Voigt-Reuss", check_brackets(models)))
    results.append(("Oracles", check_oracles(models, quick_mode)))
    results.append(("Zero Correctors", check_zero_correctors(models)))
    results.append(("Round Trip", check_round_trip(models)))
    if not quick_mode:
        results.append(("Magnetic", check_magnetic(models)))

    # Summary
    print("\n" + "=" * 60)
    print("Summary")
    print("=" * 60)

    all_passed = True
    for name, passed in results:
        status = "PASS" if passed else "FAIL"
        if not passed:
            all_passed = False
        print(f"   {name}: [{status}]")

    print()
    if all_passed:
        print("All validation checks passed!")
    else:
        print("Some validation checks failed. Review output above.")

    return 0 if all_passed else 1


if __name__ == '__main__':
    sys.exit(main())
