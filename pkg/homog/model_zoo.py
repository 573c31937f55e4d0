"""
Model zoo: canonical homogenization problems with known or
oracle-computable effective coefficients.

A ProblemSpec holds JSON-compatible field specs for g, a_j, Q and Q0, the
symbol b(D) as stacked matrices, the domain box and, when available, the
closed-form effective matrix. Builders return ProblemSpecs; the registry
(model_registry.py) resolves names to them.

Usage:
    from homog.model_zoo import build_1d_scalar

    problem = build_1d_scalar('2 + sin(2*pi*x1)')
    coeffs = problem.sample(256)
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from homog.errors import ConfigError
from homog.field_specs import (
    compile_spec, constant_spec, expr_spec, format_complex, fourier_spec, parse_matrix,
)
from homog.periodic_core import (
    Coefficients, Lattice, PeriodicField, SymbolB, cell_mean, harmonic_mean,
    hermitize, make_cubic_lattice, make_symbol, sample_field,
)

logger = logging.getLogger(__name__)

SpecLike = Union[Dict, str, float, int]

ORACLE_GRID = {1: 4096, 2: 256, 3: 64}
BUILD_GRID = {1: 128, 2: 32, 3: 16}
MODE_TOL = 1e-13
ZERO_MEAN_TOL = 1e-12
TAGS = ('zero-corrector', 'g0-equals-underline', 'g0-equals-overline', 'schrodinger', 'laminate',
        'constant', 'potential-shift')


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A homogenization problem B_ε on a box O."""
    name: str
    dim: int
    n: int
    m: int
    g: Dict
    a: Tuple[Dict, ...]
    Q: Dict
    Q0: Dict
    b: List
    box: List
    known_effective: Optional[List] = None
    tags: Tuple[str, ...] = ()
    description: str = ''
    magnetic: Optional[Dict] = None

    @property
    def lattice(self) -> Lattice:
        return make_cubic_lattice(self.dim)

    @property
    def known_effective_matrix(self) -> Optional[np.ndarray]:
        if self.known_effective is None:
            return None
        return parse_matrix(self.known_effective)

    def symbol(self) -> SymbolB:
        return make_symbol(_parse_b(self.b, self.dim))

    def sample(self, n_grid: int) -> Coefficients:
        """Sample every coefficient on the N^d cell grid (Q is hermitized)."""
        lattice = self.lattice
        g = sample_field(self.g, lattice, n_grid, shape=(self.m, self.m), require_positive=True)
        a_specs = self.a or (constant_spec(0.0, shape=(self.n, self.n)),) * self.dim
        a = tuple(sample_field(spec, lattice, n_grid, shape=(self.n, self.n)) for spec in a_specs)
        Q = hermitize(sample_field(self.Q, lattice, n_grid, shape=(self.n, self.n)))
        Q0 = sample_field(self.Q0, lattice, n_grid, shape=(self.n, self.n), require_positive=True)
        return Coefficients(g=g, a=a, Q=Q, Q0=Q0)

    def sample_magnetic(self, n_grid: int) -> Optional[Tuple[Tuple[PeriodicField, ...], PeriodicField]]:
        """(A fields, V_pot field) for magnetic models, else None."""
        if not self.magnetic:
            return None
        lattice = self.lattice
        A = tuple(sample_field(as_spec(s), lattice, n_grid, shape=(1, 1)) for s in self.magnetic['A'])
        V_pot = sample_field(as_spec(self.magnetic['V_pot']), lattice, n_grid, shape=(1, 1))
        return A, V_pot


def as_spec(value: SpecLike) -> Dict:
    """A spec dict, an expression string or a number → spec dict."""
    if isinstance(value, dict):
        return value
    if isinstance(value, str):
        return expr_spec(value)
    if isinstance(value, (int, float, complex)) and not isinstance(value, bool):
        return constant_spec(value)
    raise ConfigError(f"Cannot interpret {value!r} as a field spec")


def _parse_b(b, dim: int) -> np.ndarray:
    mats = np.array([parse_matrix(bj) for bj in b])
    if mats.shape[0] != dim:
        raise ConfigError(f"Symbol has {mats.shape[0]} matrices, dimension is {dim}")
    return mats


def _format_matrix(mat: np.ndarray) -> List:
    return [[format_complex(v) for v in row] for row in np.atleast_2d(mat)]


def gradient_b(dim: int) -> List:
    """b(D) = D for scalar problems: b_j = e_j as (d × 1) columns."""
    return [_format_matrix(np.eye(dim)[:, j:j + 1]) for j in range(dim)]


def _check_box(box, dim: int) -> List:
    box = [[float(lo), float(hi)] for lo, hi in box]
    if len(box) != dim or any(hi <= lo for lo, hi in box):
        raise ConfigError(f"Box {box} does not describe a {dim}-dimensional domain")
    return box


def validate_problem(problem: ProblemSpec) -> None:
    """Check mutual consistency of shapes and tags."""
    d = problem.dim
    if not 1 <= d <= 3:
        raise ConfigError(f"Unsupported dimension {d}")
    b = _parse_b(problem.b, d)
    if b.shape[1:] != (problem.m, problem.n):
        raise ConfigError(f"Symbol matrices are {b.shape[1:]}, expected ({problem.m}, {problem.n})")
    if problem.a and len(problem.a) != d:
        raise ConfigError(f"Need {d} fields a_j, got {len(problem.a)}")
    checks = [('g', problem.g, (problem.m, problem.m)), ('Q', problem.Q, (problem.n, problem.n)),
              ('Q0', problem.Q0, (problem.n, problem.n))]
    checks += [(f'a_{j + 1}', spec, (problem.n, problem.n)) for j, spec in enumerate(problem.a)]
    for label, spec, shape in checks:
        compiled = compile_spec(spec, d)
        if compiled.shape != shape:
            raise ConfigError(f"{problem.name}: {label} has shape {compiled.shape}, expected {shape}")
    if problem.known_effective is not None:
        if problem.known_effective_matrix.shape != (problem.m, problem.m):
            raise ConfigError(f"{problem.name}: known_effective must be {problem.m}×{problem.m}")
    unknown = set(problem.tags) - set(TAGS)
    if unknown:
        raise ConfigError(f"{problem.name}: unknown tags {sorted(unknown)}")
    _check_box(problem.box, d)


def check_known_effective(problem: ProblemSpec, n_grid: Optional[int] = None, tol: float = 1e-8) -> bool:
    """Voigt–Reuss bracket of known_effective against the sampled g."""
    target = problem.known_effective_matrix
    if target is None:
        return True
    g = sample_field(problem.g, problem.lattice, n_grid or ORACLE_GRID[problem.dim])
    lower = np.linalg.eigvalsh(0.5 * (target + target.conj().T) - harmonic_mean(g)).min()
    upper = np.linalg.eigvalsh(cell_mean(g) - 0.5 * (target + target.conj().T)).min()
    scale = max(1.0, float(np.abs(target).max()))
    return bool(lower >= -tol * scale and upper >= -tol * scale)


def _make(name, dim, g, Q, Q0, box, a=(), b=None, n=1, m=None, known_effective=None, tags=(),
          description='', magnetic=None) -> ProblemSpec:
    problem = ProblemSpec(
        name=name, dim=dim, n=n, m=m if m is not None else dim,
        g=g, a=tuple(a), Q=Q, Q0=Q0, b=b if b is not None else gradient_b(dim),
        box=_check_box(box if box is not None else [[0.0, 1.0]] * dim, dim),
        known_effective=known_effective, tags=tuple(tags), description=description,
        magnetic=magnetic,
    )
    validate_problem(problem)
    return problem


# =============================================================================
# Spec arithmetic
# =============================================================================

def scale_spec(spec: SpecLike, factor: float) -> Dict:
    """factor · spec for scalar constant, fourier, piecewise and expr specs."""
    spec = as_spec(spec)
    kind = spec.get('kind')
    params = dict(spec.get('parameters', {}))
    if kind == 'constant':
        params['value'] = _format_matrix(factor * parse_matrix(params['value']))
    elif kind == 'fourier':
        params['modes'] = [dict(mode, coef=_format_matrix(factor * parse_matrix(mode.get('coef', 0))))
                           for mode in params['modes']]
    elif kind == 'piecewise':
        params['values'] = [_format_matrix(factor * parse_matrix(v)) for v in params['values']]
    elif kind == 'expr' and 'expression' in params:
        params['expression'] = f"{factor!r}*({params['expression']})"
    else:
        raise ConfigError(f"Cannot scale a {kind} spec")
    return dict(spec, parameters=params)


def _depends_only_on(spec: Dict, axis: int, dim: int, samples: int = 64) -> bool:
    compiled = compile_spec(spec, dim)
    rng = np.random.default_rng(12345)
    points = rng.random((samples, dim))
    shuffled = rng.random((samples, dim))
    shuffled[:, axis] = points[:, axis]
    return bool(np.allclose(compiled.evaluate(points), compiled.evaluate(shuffled), atol=1e-14))


def _fourier_modes(values: np.ndarray, dim: int) -> Dict[Tuple[int, ...], complex]:
    """Significant Fourier coefficients of nodal scalar values (N,)*d, Nyquist excluded."""
    n_grid = values.shape[0]
    coefs = np.fft.fftn(values) / n_grid ** dim
    k = np.fft.fftfreq(n_grid, d=1.0 / n_grid).astype(int)
    scale = max(1.0, float(np.abs(coefs).max()))
    modes = {}
    for index in zip(*np.nonzero(np.abs(coefs) > MODE_TOL * scale)):
        wave = tuple(int(k[i]) for i in index)
        if any(abs(w) == n_grid // 2 for w in wave):
            logger.warning("Nyquist mode %s is significant; build grid %d is too coarse", wave, n_grid)
            continue
        modes[wave] = complex(coefs[index])
    return modes


def _fourier_from_values(values: np.ndarray, dim: int) -> Dict:
    modes = _fourier_modes(values, dim)
    if not modes:
        return constant_spec(0.0)
    return fourier_spec(modes)


# =============================================================================
# Builders
# =============================================================================

def build_constant(value: float = 2.0, dim: int = 1, box=None) -> ProblemSpec:
    """Constant isotropic coefficient; homogenization is the identity."""
    g = constant_spec(value) if dim == 1 else constant_spec(value, shape=(dim, dim))
    return _make('constant', dim, g=g, Q=constant_spec(0.0), Q0=constant_spec(1.0), box=box,
                 known_effective=_format_matrix(value * np.eye(dim)), tags=('constant', 'zero-corrector'),
                 description=f"g = {value} I, no lower-order terms")


def build_1d_scalar(gamma: SpecLike, name: str = 'scalar-1d', box=None, description: str = '') -> ProblemSpec:
    """d = 1, b(D) = D: effective coefficient is the harmonic mean of γ."""
    spec = as_spec(gamma)
    lattice = make_cubic_lattice(1)
    sampled = sample_field(spec, lattice, ORACLE_GRID[1], shape=(1, 1), require_positive=True)
    effective = harmonic_mean(sampled)
    return _make(name, 1, g=spec, Q=constant_spec(0.0), Q0=constant_spec(1.0), box=box,
                 known_effective=_format_matrix(effective), tags=('g0-equals-underline',),
                 description=description or "1D scalar, g⁰ = harmonic mean of γ")


def build_2d_laminate(gamma: SpecLike, weights: Sequence[float] = (1.0, 1.0), name: str = 'laminate',
                      box=None, description: str = '') -> ProblemSpec:
    """g = γ(x₁) diag(w₁, w₂): layers normal to x₁.

    Effective matrix diag(w₁ · harmonic mean γ, w₂ · mean γ).
    """
    spec = as_spec(gamma)
    if not _depends_only_on(spec, 0, 2):
        raise ConfigError("Laminate profile must depend on x1 only")
    w1, w2 = (float(w) for w in weights)
    if min(w1, w2) <= 0:
        raise ConfigError(f"Laminate weights must be positive, got {weights}")
    g = {'kind': 'matrix', 'shape': [2, 2],
         'parameters': {'entries': [[scale_spec(spec, w1), 0], [0, scale_spec(spec, w2)]]}}
    sampled = sample_field(spec, make_cubic_lattice(2), ORACLE_GRID[2], shape=(1, 1), require_positive=True)
    effective = np.diag([w1 * harmonic_mean(sampled)[0, 0].real, w2 * cell_mean(sampled)[0, 0].real])
    return _make(name, 2, g=g, Q=constant_spec(0.0), Q0=constant_spec(1.0), box=box,
                 known_effective=_format_matrix(effective), tags=('laminate',),
                 description=description or "2D laminate γ(x1)·diag(w1, w2)")


def build_divergence_free_laminate(gamma1: SpecLike, gamma2: SpecLike, name: str = 'divfree-laminate',
                                   box=None) -> ProblemSpec:
    """g = diag(γ₁(x₂), γ₂(x₁)): divergence-free columns, so g⁰ = ḡ."""
    spec1, spec2 = as_spec(gamma1), as_spec(gamma2)
    if not _depends_only_on(spec1, 1, 2) or not _depends_only_on(spec2, 0, 2):
        raise ConfigError("Need gamma1 = gamma1(x2) and gamma2 = gamma2(x1)")
    g = {'kind': 'matrix', 'shape': [2, 2], 'parameters': {'entries': [[spec1, 0], [0, spec2]]}}
    sampled = sample_field(g, make_cubic_lattice(2), ORACLE_GRID[2], shape=(2, 2), require_positive=True)
    return _make(name, 2, g=g, Q=constant_spec(0.0), Q0=constant_spec(1.0), box=box,
                 known_effective=_format_matrix(cell_mean(sampled).real), tags=('laminate', 'g0-equals-overline'),
                 description="diag(γ1(x2), γ2(x1)), effective matrix equals the mean")


def build_zero_corrector_case(dim: int = 2, g_value: float = 1.5, psi: Optional[Dict] = None,
                              potential: SpecLike = '0.5*cos(2*pi*x1)', name: str = 'zero-corrector',
                              box=None) -> ProblemSpec:
    """Constant g and a_j from a stream function: a₁ = ∂₂ψ, a₂ = −∂₁ψ, so Σ D_j a_j* = 0.

    In d = 1 the only divergence-free choice is a constant a₁; ``psi``
    then gives that constant. Both cell solutions vanish.
    """
    if dim == 1:
        value = 0.25 if psi is None else float(psi)
        a = (constant_spec(value),)
    elif dim == 2:
        psi_modes = psi or {(1, 1): 0.05, (-1, -1): 0.05, (1, 0): -0.03j, (-1, 0): 0.03j}
        a1 = {k: 2j * np.pi * k[1] * c for k, c in psi_modes.items() if k[1]}
        a2 = {k: -2j * np.pi * k[0] * c for k, c in psi_modes.items() if k[0]}
        a = tuple(fourier_spec(m) if m else constant_spec(0.0) for m in (a1, a2))
    else:
        raise ConfigError("Zero-corrector case is built for d = 1 or 2")
    g = constant_spec(g_value) if dim == 1 else constant_spec(g_value, shape=(dim, dim))
    return _make(name, dim, g=g, a=a, Q=as_spec(potential), Q0=constant_spec(1.0), box=box,
                 known_effective=_format_matrix(g_value * np.eye(dim)), tags=('zero-corrector',),
                 description="constant g, curl-type a_j: Λ = Λ̃ = 0")


def build_scalar_magnetic(A: Sequence[SpecLike], v: SpecLike, V_pot: SpecLike, g: SpecLike,
                          Q0: SpecLike = 1.0, dim: Optional[int] = None, name: str = 'magnetic',
                          box=None, n_build: Optional[int] = None) -> ProblemSpec:
    """Scalar operator (D − A^ε)* g^ε (D − A^ε) + ε⁻¹v^ε + V^ε written as
    D* g^ε D + Σ (a_j^ε D_j + D_j (a_j^ε)*) + Q^ε.

    Solves ΔΦ = v with zero mean spectrally and sets ξ_j = −∂_jΦ,
    η = gA, a_j = −η_j + iξ_j and Q = V + ⟨gA, A⟩. Derived fields are
    stored as Fourier specs, exact for trigonometric-polynomial inputs.
    """
    dim = dim or len(A)
    if len(A) != dim:
        raise ConfigError(f"Need {dim} magnetic potential components, got {len(A)}")
    lattice = make_cubic_lattice(dim)
    n_build = n_build or BUILD_GRID[dim]
    g_spec = as_spec(g)
    if compile_spec(g_spec, dim).shape == (1, 1) and dim > 1:
        g_spec = dict(g_spec, shape=[dim, dim])
    g_field = sample_field(g_spec, lattice, n_build, shape=(dim, dim), require_positive=True)
    if not np.allclose(g_field.values.imag, 0.0):
        raise ConfigError("Magnetic models need a real g")
    a_fields = [sample_field(as_spec(s), lattice, n_build, shape=(1, 1)) for s in A]
    v_field = sample_field(as_spec(v), lattice, n_build, shape=(1, 1))
    V_field = sample_field(as_spec(V_pot), lattice, n_build, shape=(1, 1))
    for label, fld in [('v', v_field), ('V_pot', V_field)] + [(f'A_{j + 1}', f) for j, f in enumerate(a_fields)]:
        if np.max(np.abs(fld.values.imag)) > 1e-14:
            raise ConfigError(f"{label} must be real")

    v_values = v_field.values[..., 0, 0].real
    if abs(v_values.mean()) > ZERO_MEAN_TOL:
        raise ConfigError(f"v must have zero cell mean, got {v_values.mean():.3e}")
    xi_vec, _ = _poisson_gradient(v_values, dim)

    potential = np.stack([f.values[..., 0, 0].real for f in a_fields], axis=-1)
    eta = np.einsum('...jk,...k->...j', g_field.values.real, potential)
    a_specs = tuple(_fourier_from_values(-eta[..., j] + 1j * xi_vec[..., j], dim) for j in range(dim))
    q_values = V_field.values[..., 0, 0].real + np.einsum('...j,...j->...', eta, potential)
    Q = _fourier_from_values(q_values, dim)

    magnetic = {'A': [as_spec(s) for s in A], 'v': as_spec(v), 'V_pot': as_spec(V_pot)}
    return _make(name, dim, g=g_spec, a=a_specs, Q=Q, Q0=as_spec(Q0), box=box, tags=('schrodinger',),
                 description="magnetic Schrödinger-type operator with singular potential", magnetic=magnetic)


def _poisson_gradient(v_values: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """ξ = −∇Φ with ΔΦ = v, mean Φ = 0, spectrally on the grid; returns (ξ (N,)*d + (d,), Φ)."""
    n_grid = v_values.shape[0]
    k = np.fft.fftfreq(n_grid, d=1.0 / n_grid)
    waves = np.stack(np.meshgrid(*([k] * dim), indexing='ij'), axis=-1)
    v_hat = np.fft.fftn(v_values)
    k2 = np.sum(waves ** 2, axis=-1)
    phi_hat = np.zeros_like(v_hat)
    nonzero = k2 > 0
    phi_hat[nonzero] = -v_hat[nonzero] / (4 * np.pi ** 2 * k2[nonzero])
    xi = np.stack([np.fft.ifftn(-2j * np.pi * waves[..., j] * phi_hat).real for j in range(dim)], axis=-1)
    return xi, np.fft.ifftn(phi_hat).real


def build_potential_shift(q: float = -5.0, g_value: float = 1.0, dim: int = 1, name: str = 'potential-shift',
                          box=None) -> ProblemSpec:
    """Constant g with Q = q I, Q0 = I: a negative q forces a positive shift λ."""
    g = constant_spec(g_value) if dim == 1 else constant_spec(g_value, shape=(dim, dim))
    return _make(name, dim, g=g, Q=constant_spec(q), Q0=constant_spec(1.0), box=box,
                 known_effective=_format_matrix(g_value * np.eye(dim)), tags=('constant', 'potential-shift'),
                 description=f"constant g, Q = {q}: exercises the coercivity shift")


BUILDERS = {
    'constant': build_constant,
    '1d_scalar': build_1d_scalar,
    '2d_laminate': build_2d_laminate,
    'divergence_free_laminate': build_divergence_free_laminate,
    'zero_corrector': build_zero_corrector_case,
    'scalar_magnetic': build_scalar_magnetic,
    'potential_shift': build_potential_shift,
}


def build_from_recipe(recipe: Dict) -> ProblemSpec:
    """{"builder": name, "parameters": {...}} → ProblemSpec."""
    builder = recipe.get('builder')
    if builder not in BUILDERS:
        raise ConfigError(f"Unknown builder {builder!r}; expected one of {sorted(BUILDERS)}")
    params = dict(recipe.get('parameters', {}))
    if 'psi' in params and isinstance(params['psi'], dict) and 'modes' in params['psi']:
        params['psi'] = {tuple(mode['k']): complex(parse_matrix(mode['coef'])[0, 0])
                         for mode in params['psi']['modes']}
    try:
        problem = BUILDERS[builder](**params)
    except TypeError as exc:
        raise ConfigError(f"Bad parameters for builder {builder!r}: {exc}") from exc
    if recipe.get('name'):
        problem = _renamed(problem, recipe['name'], recipe.get('description'))
    return problem


def _renamed(problem: ProblemSpec, name: str, description: Optional[str]) -> ProblemSpec:
    data = problem_to_dict(problem)
    data['name'] = name
    if description:
        data['description'] = description
    return problem_from_dict(data)


# =============================================================================
# Serialization
# =============================================================================

def problem_to_dict(problem: ProblemSpec) -> Dict:
    data = {
        'name': problem.name,
        'dimension': problem.dim,
        'n': problem.n,
        'm': problem.m,
        'symbol': problem.b,
        'coefficients': {'g': problem.g, 'a': list(problem.a), 'Q': problem.Q, 'Q0': problem.Q0},
        'box': problem.box,
        'known_effective': problem.known_effective,
        'tags': list(problem.tags),
        'description': problem.description,
    }
    if problem.magnetic:
        data['magnetic'] = problem.magnetic
    return data


def problem_from_dict(data: Dict) -> ProblemSpec:
    """Inverse of problem_to_dict; a dict with a "builder" key is built from its recipe."""
    if 'builder' in data:
        return build_from_recipe(data)
    try:
        dim = int(data['dimension'])
        coefficients = data['coefficients']
        problem = ProblemSpec(
            name=str(data['name']), dim=dim, n=int(data.get('n', 1)), m=int(data.get('m', dim)),
            g=as_spec(coefficients['g']), a=tuple(as_spec(s) for s in coefficients.get('a', [])),
            Q=as_spec(coefficients.get('Q', 0.0)), Q0=as_spec(coefficients.get('Q0', 1.0)),
            b=data.get('symbol') or gradient_b(dim), box=data.get('box') or [[0.0, 1.0]] * dim,
            known_effective=data.get('known_effective'), tags=tuple(data.get('tags', ())),
            description=data.get('description', ''), magnetic=data.get('magnetic'),
        )
    except KeyError as exc:
        raise ConfigError(f"Problem spec is missing {exc}") from exc
    validate_problem(problem)
    return problem
