"""
JSON serialization of cell solutions, effective operators and solve
results. Complex arrays are stored as {"shape", "re", "im"} records.

Usage:
    from homog.io_utils import write_json, cell_solution_to_dict

    write_json('results/cell.json', cell_solution_to_dict(cell, effective))
"""

import json
import os
from typing import Any, Dict, Optional

import numpy as np

from homog.cell_solver import CellSolution, EffectiveOperator
from homog.errors import ConfigError


def encode_array(values) -> Dict[str, Any]:
    values = np.asarray(values, dtype=complex)
    return {
        'shape': list(values.shape),
        're': values.real.ravel().tolist(),
        'im': values.imag.ravel().tolist(),
    }


def decode_array(record: Dict[str, Any]) -> np.ndarray:
    try:
        re = np.asarray(record['re'], dtype=float)
        im = np.asarray(record['im'], dtype=float)
        return (re + 1j * im).reshape(record['shape'])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"Malformed array record: {exc}") from exc


def write_json(path: str, data: Dict[str, Any]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
    return path


def read_json(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise ConfigError(f"File not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def effective_to_dict(effective: EffectiveOperator) -> Dict[str, Any]:
    return {
        'g0': encode_array(effective.g0),
        'V': encode_array(effective.V),
        'W': encode_array(effective.W),
        'a_mean': encode_array(effective.a_mean),
        'Q_mean': encode_array(effective.Q_mean),
        'Q0_mean': encode_array(effective.Q0_mean),
        'lambda_shift': effective.lambda_shift,
        'c_star': effective.c_star,
        'c_star_bound': effective.c_star_bound,
        'C_L': effective.C_L,
    }


def cell_solution_to_dict(cell: CellSolution, effective: Optional[EffectiveOperator] = None,
                          model: Optional[str] = None, include_fields: bool = True) -> Dict[str, Any]:
    """CellSolution (plus the effective operator) as a JSON-compatible dict."""
    data: Dict[str, Any] = {
        'model': model,
        'n_grid': cell.n_grid,
        'dimension': cell.g.dim,
        'residuals': {'lambda': cell.residuals[0], 'lambda_tilde': cell.residuals[1]},
        'g0': encode_array(cell.g0),
        'V': encode_array(cell.V),
        'W': encode_array(cell.W),
        'zero_corrector': cell.is_zero_corrector,
    }
    if include_fields:
        data['lambda'] = encode_array(cell.lam.values)
        data['lambda_tilde'] = encode_array(cell.lam_tilde.values)
    if effective is not None:
        data['effective'] = effective_to_dict(effective)
    return data


def solve_result_to_dict(result, mesh=None) -> Dict[str, Any]:
    """SolveResult (or any object with u, zeta, epsilon, residual, wallclock) as a dict."""
    data = {
        'kind': getattr(result, 'kind', None),
        'epsilon': result.epsilon,
        'zeta': [complex(result.zeta).real, complex(result.zeta).imag],
        'residual': result.residual,
        'u': encode_array(result.u),
    }
    if mesh is not None:
        data['mesh'] = {'lower': mesh.lower.tolist(), 'upper': mesh.upper.tolist(), 'h': mesh.h,
                        'shape': list(mesh.shape)}
    return data


def nodal_to_dict(name: str, values, mesh=None) -> Dict[str, Any]:
    data = {'kind': name, 'u': encode_array(values)}
    if mesh is not None:
        data['mesh'] = {'lower': mesh.lower.tolist(), 'upper': mesh.upper.tolist(), 'h': mesh.h,
                        'shape': list(mesh.shape)}
    return data
