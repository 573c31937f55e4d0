"""
Coefficient field specs: JSON-compatible descriptions of Γ-periodic
matrix-valued functions, compiled into vectorized evaluators.

A spec is a dict ``{"kind": ..., "shape": [rows, cols], "parameters": {...}}``
with kind one of:

    constant   {"value": 2}                       scalar (times I if square) or matrix
    fourier    {"modes": [{"k": [1], "coef": 0.5}, ...]}
    piecewise  {"axis": 0, "breaks": [0, 0.5], "values": [1, 3]}
    expr       {"expression": "2 + sin(2*pi*x1)"} or {"expressions": [[...]]}
    matrix     {"entries": [[spec, 0], [0, spec]]}  scalar specs per entry

Points are given in cell coordinates y in [0, 1)^d. Complex numbers are
written as Python-style strings ("0.3+1j") or plain numbers.

Usage:
    from homog.field_specs import compile_spec
    compiled = compile_spec({"kind": "expr", "parameters": {"expression": "2 + sin(2*pi*x1)"}}, 1)
    values = compiled.evaluate(points)   # (P, rows, cols)
"""

import ast
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from homog.errors import ConfigError

SPEC_KINDS = ('constant', 'fourier', 'piecewise', 'expr', 'matrix')

_EXPR_FUNCTIONS = {'sin': np.sin, 'cos': np.cos, 'exp': np.exp}
_EXPR_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult,
    ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Call, ast.Name, ast.Load,
    ast.Constant,
)


@dataclass(frozen=True)
class CompiledSpec:
    shape: Tuple[int, int]
    piecewise: bool
    breaks: Tuple[Tuple[int, Tuple[float, ...]], ...]
    evaluate: Callable[[np.ndarray], np.ndarray]


def parse_complex(value) -> complex:
    """Parse a JSON scalar (number or "a+bj" string) into a complex number."""
    if isinstance(value, bool):
        raise ConfigError(f"Boolean is not a coefficient value: {value!r}")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(' ', ''))
        except ValueError as exc:
            raise ConfigError(f"Cannot parse complex value: {value!r}") from exc
    raise ConfigError(f"Unsupported coefficient value: {value!r}")


def parse_matrix(value) -> np.ndarray:
    """Parse a scalar or nested list into a 2D complex array."""
    if isinstance(value, list):
        rows = [row if isinstance(row, list) else [row] for row in value]
        width = {len(row) for row in rows}
        if len(width) != 1:
            raise ConfigError(f"Ragged matrix value: {value!r}")
        return np.array([[parse_complex(v) for v in row] for row in rows], dtype=complex)
    return np.array([[parse_complex(value)]], dtype=complex)


def format_complex(value: complex):
    """Inverse of parse_complex: real numbers stay numbers, others become strings."""
    value = complex(value)
    if value.imag == 0.0:
        return float(value.real)
    return repr(value).strip('()')


def _expand(base: np.ndarray, shape: Optional[Tuple[int, int]]) -> np.ndarray:
    """Broadcast a (1, 1) value to ``shape`` as a multiple of the identity."""
    if shape is None or base.shape == tuple(shape):
        return base
    if base.shape == (1, 1) and shape[0] == shape[1]:
        return base[0, 0] * np.eye(shape[0], dtype=complex)
    raise ConfigError(f"Value of shape {base.shape} does not match spec shape {tuple(shape)}")


def _spec_shape(spec: Dict) -> Optional[Tuple[int, int]]:
    shape = spec.get('shape')
    if shape is None:
        return None
    if len(shape) != 2 or min(shape) < 1:
        raise ConfigError(f"Spec shape must be [rows, cols], got {shape!r}")
    return int(shape[0]), int(shape[1])


def _check_expression(tree: ast.AST, dim: int, source: str) -> None:
    allowed_names = {f'x{j + 1}' for j in range(dim)} | {'pi'} | set(_EXPR_FUNCTIONS)
    for node in ast.walk(tree):
        if not isinstance(node, _EXPR_NODES):
            raise ConfigError(f"Unsupported syntax {type(node).__name__} in expression {source!r}")
        if isinstance(node, ast.Name) and node.id not in allowed_names:
            raise ConfigError(f"Unknown name {node.id!r} in expression {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _EXPR_FUNCTIONS:
                raise ConfigError(f"Only sin, cos, exp calls allowed in {source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"Functions take one argument in {source!r}")
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            if not isinstance(node.right, ast.Constant):
                raise ConfigError(f"Exponents must be constants in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, complex)):
            raise ConfigError(f"Non-numeric constant in expression {source!r}")


def compile_expression(source: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a scalar expression in x1..xd into a vectorized evaluator."""
    try:
        tree = ast.parse(source.strip(), mode='eval')
    except SyntaxError as exc:
        raise ConfigError(f"Cannot parse expression {source!r}: {exc.msg}") from exc
    _check_expression(tree, dim, source)
    code = compile(tree, '<field-expression>', 'eval')

    def evaluate(points: np.ndarray) -> np.ndarray:
        namespace = dict(_EXPR_FUNCTIONS)
        namespace['pi'] = np.pi
        for j in range(dim):
            namespace[f'x{j + 1}'] = points[:, j]
        result = eval(code, {'__builtins__': {}}, namespace)
        return np.broadcast_to(np.asarray(result, dtype=complex), (points.shape[0],)).copy()

    return evaluate


def _compile_constant(params: Dict, shape, dim: int) -> CompiledSpec:
    if 'value' not in params:
        raise ConfigError("constant spec needs parameters.value")
    value = _expand(parse_matrix(params['value']), shape)

    def evaluate(points):
        return np.broadcast_to(value, (points.shape[0],) + value.shape).copy()

    return CompiledSpec(value.shape, False, (), evaluate)


def _compile_fourier(params: Dict, shape, dim: int) -> CompiledSpec:
    modes = params.get('modes')
    if not modes:
        raise ConfigError("fourier spec needs a non-empty parameters.modes list")
    wavevectors = []
    coefs = []
    for mode in modes:
        k = mode.get('k')
        k = [k] if isinstance(k, (int, float)) else k
        if k is None or len(k) != dim or any(float(kj) != int(kj) for kj in k):
            raise ConfigError(f"Fourier mode needs {dim} integer wavenumbers, got {k!r}")
        wavevectors.append([int(kj) for kj in k])
        coefs.append(_expand(parse_matrix(mode.get('coef', 0)), shape))
    if len({c.shape for c in coefs}) != 1:
        raise ConfigError("Fourier coefficients have inconsistent shapes")
    wavevectors = np.array(wavevectors, dtype=float)
    coefs = np.array(coefs)

    def evaluate(points):
        phases = np.exp(2j * np.pi * points @ wavevectors.T)
        return np.einsum('pk,krc->prc', phases, coefs)

    return CompiledSpec(coefs.shape[1:], False, (), evaluate)


def _compile_piecewise(params: Dict, shape, dim: int) -> CompiledSpec:
    axis = int(params.get('axis', 0))
    if not 0 <= axis < dim:
        raise ConfigError(f"piecewise axis {axis} outside dimension {dim}")
    breaks = np.array([float(b) for b in params.get('breaks', [])])
    raw_values = params.get('values', [])
    if len(breaks) == 0 or len(breaks) != len(raw_values):
        raise ConfigError("piecewise spec needs matching breaks and values")
    if np.any(np.diff(breaks) <= 0) or breaks[0] < 0 or breaks[-1] >= 1:
        raise ConfigError(f"piecewise breaks must increase inside [0, 1): {breaks.tolist()}")
    values = np.array([_expand(parse_matrix(v), shape) for v in raw_values])

    def evaluate(points):
        y = np.mod(points[:, axis], 1.0)
        # right-continuous: a point on a break takes the value to its right
        index = np.searchsorted(breaks, y + 1e-12, side='right') - 1
        return values[np.mod(index, len(breaks))]

    return CompiledSpec(values.shape[1:], True, ((axis, tuple(breaks)),), evaluate)


def _compile_expr(params: Dict, shape, dim: int) -> CompiledSpec:
    if 'expression' in params:
        scalar = compile_expression(str(params['expression']), dim)
        size = shape[0] if shape is not None and shape[0] == shape[1] else 1
        if shape is not None and shape[0] != shape[1] and shape != (1, 1):
            raise ConfigError("Scalar expression needs a square shape")
        eye = np.eye(size, dtype=complex)

        def evaluate(points):
            return scalar(points)[:, None, None] * eye

        return CompiledSpec((size, size), False, (), evaluate)
    table = params.get('expressions')
    if not table:
        raise ConfigError("expr spec needs parameters.expression or parameters.expressions")
    rows = [row if isinstance(row, list) else [row] for row in table]
    entries = [[compile_expression(str(src), dim) for src in row] for row in rows]
    out_shape = (len(entries), len(entries[0]))
    if shape is not None and tuple(shape) != out_shape:
        raise ConfigError(f"expressions table is {out_shape}, spec shape is {tuple(shape)}")

    def evaluate(points):
        out = np.empty((points.shape[0],) + out_shape, dtype=complex)
        for r, row in enumerate(entries):
            for c, fn in enumerate(row):
                out[:, r, c] = fn(points)
        return out

    return CompiledSpec(out_shape, False, (), evaluate)


def _compile_matrix(params: Dict, shape, dim: int) -> CompiledSpec:
    table = params.get('entries')
    if not table:
        raise ConfigError("matrix spec needs parameters.entries")
    compiled: List[List[Optional[CompiledSpec]]] = []
    for row in table:
        compiled_row = []
        for entry in row:
            if entry is None:
                entry = 0
            if not isinstance(entry, dict):
                entry = {'kind': 'constant', 'parameters': {'value': entry}}
            sub = compile_spec(entry, dim)
            if sub.shape != (1, 1):
                raise ConfigError("matrix entries must be scalar specs")
            compiled_row.append(sub)
        compiled.append(compiled_row)
    out_shape = (len(compiled), len(compiled[0]))
    if any(len(row) != out_shape[1] for row in compiled):
        raise ConfigError("matrix spec rows have different lengths")
    if shape is not None and tuple(shape) != out_shape:
        raise ConfigError(f"matrix entries are {out_shape}, spec shape is {tuple(shape)}")
    breaks = tuple(b for row in compiled for sub in row for b in sub.breaks)

    def evaluate(points):
        out = np.empty((points.shape[0],) + out_shape, dtype=complex)
        for r, row in enumerate(compiled):
            for c, sub in enumerate(row):
                out[:, r, c] = sub.evaluate(points)[:, 0, 0]
        return out

    piecewise = any(sub.piecewise for row in compiled for sub in row)
    return CompiledSpec(out_shape, piecewise, breaks, evaluate)


_COMPILERS = {
    'constant': _compile_constant,
    'fourier': _compile_fourier,
    'piecewise': _compile_piecewise,
    'expr': _compile_expr,
    'matrix': _compile_matrix,
}


def compile_spec(spec: Dict, dim: int) -> CompiledSpec:
    """Validate a field spec and compile it into an evaluator on cell coordinates."""
    if not isinstance(spec, dict):
        raise ConfigError(f"Field spec must be a dict, got {type(spec).__name__}")
    kind = spec.get('kind')
    if kind not in _COMPILERS:
        raise ConfigError(f"Unknown field spec kind {kind!r}; expected one of {SPEC_KINDS}")
    shape = _spec_shape(spec)
    compiled = _COMPILERS[kind](spec.get('parameters', {}), shape, dim)
    if shape is not None and compiled.shape != shape:
        raise ConfigError(f"{kind} spec produced shape {compiled.shape}, declared {shape}")
    return compiled


def constant_spec(value, shape: Optional[Sequence[int]] = None) -> Dict:
    """Build a constant spec dict from a scalar or a matrix."""
    if isinstance(value, np.ndarray):
        value = [[format_complex(v) for v in row] for row in np.atleast_2d(value)]
    elif isinstance(value, complex):
        value = format_complex(value)
    spec = {'kind': 'constant', 'parameters': {'value': value}}
    if shape is not None:
        spec['shape'] = [int(shape[0]), int(shape[1])]
    return spec


def expr_spec(expression: str, shape: Optional[Sequence[int]] = None) -> Dict:
    spec = {'kind': 'expr', 'parameters': {'expression': expression}}
    if shape is not None:
        spec['shape'] = [int(shape[0]), int(shape[1])]
    return spec


def fourier_spec(modes: Dict[Tuple[int, ...], complex], shape: Optional[Sequence[int]] = None) -> Dict:
    """Build a fourier spec from {wavevector: coefficient}."""
    spec = {
        'kind': 'fourier',
        'parameters': {
            'modes': [
                {'k': [int(kj) for kj in k], 'coef': format_complex(coef)}
                for k, coef in sorted(modes.items())
            ]
        },
    }
    if shape is not None:
        spec['shape'] = [int(shape[0]), int(shape[1])]
    return spec
