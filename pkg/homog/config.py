"""
Run configuration: module defaults, JSON config files and command-line
overrides (flags win over file values).

Usage:
    from homog.config import load_run_config

    config = load_run_config('configs/reference_1d.json', {'jobs': 4})
    print(config.eps_grid, config.zeta_grid)
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from homog.errors import ConfigError
from homog.field_specs import format_complex, parse_complex

logger = logging.getLogger(__name__)

# Defaults for every run; config files and flags override these
DEFAULTS = {
    'model': 'scalar-1d-sine',
    'cell_n': None,
    'ratio': 16,
    'eps_grid': [8, 16, 32, 64],
    'zeta_grid': [-1.0],
    'mode': 'standard',
    'smoothing': True,
    'boundary_layer': False,
    'interior_margin': None,
    'corrector': True,
    'criteria': None,
    'gap_samples': 5,
    'seed': 0,
    'jobs': 1,
    'out_dir': 'results',
    'record_wallclock': False,
    'c_flat': None,
}

CELL_N_DEFAULTS = {1: 1024, 2: 64, 3: 32}
RHO_FLAT_OFFSETS = (-2.0, -0.5, -0.125)
DEFAULT_INTERIOR_MARGIN = 0.25
MIN_RATIO = 16
MODES = ('standard', 'rho-flat')


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration. ε values are stored as their integer reciprocals K."""
    model: Union[str, Dict]
    cell_n: Optional[int]
    ratio: int
    eps_inverse: Tuple[int, ...]
    zeta_grid: Tuple[complex, ...]
    mode: str
    smoothing: bool
    boundary_layer: bool
    interior_margin: Optional[float]
    corrector: bool
    criteria: Optional[Tuple]
    gap_samples: int
    seed: int
    jobs: int
    out_dir: str
    record_wallclock: bool
    c_flat: Optional[float] = None
    source: Optional[str] = None

    @property
    def eps_grid(self) -> Tuple[float, ...]:
        return tuple(1.0 / k for k in self.eps_inverse)

    @property
    def model_name(self) -> str:
        return self.model if isinstance(self.model, str) else self.model.get('name', 'inline')

    def cell_grid(self, dim: int) -> int:
        return self.cell_n or CELL_N_DEFAULTS[dim]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['eps_grid'] = list(data.pop('eps_inverse'))
        data['zeta_grid'] = [format_complex(z) for z in self.zeta_grid]
        data['criteria'] = list(self.criteria) if self.criteria is not None else None
        data.pop('source')
        return data


def parse_eps_grid(values) -> Tuple[int, ...]:
    """Integers K (ε = 1/K) or floats that are reciprocals of integers."""
    out = []
    for value in values or []:
        if isinstance(value, bool):
            raise ConfigError(f"Bad epsilon entry {value!r}")
        value = float(value)
        if value >= 1.0 and value == int(value):
            out.append(int(value))
            continue
        if not 0.0 < value <= 1.0:
            raise ConfigError(f"epsilon entry {value} is neither an integer K nor in (0, 1]")
        inverse = 1.0 / value
        if abs(inverse - round(inverse)) > 1e-9 * inverse:
            raise ConfigError(f"epsilon={value} is not of the form 1/K")
        out.append(int(round(inverse)))
    if len(set(out)) != len(out):
        raise ConfigError(f"Duplicate epsilon values in {values}")
    return tuple(out)


def _snap(value: complex) -> complex:
    scale = abs(value)
    re = 0.0 if abs(value.real) <= 1e-14 * scale else value.real
    im = 0.0 if abs(value.imag) <= 1e-14 * scale else value.imag
    return complex(re, im)


def parse_zeta_grid(value) -> Tuple[complex, ...]:
    """A list of complex numbers, or a ray {"phi": φ, "magnitudes": [...]}."""
    if value is None:
        return ()
    if isinstance(value, dict):
        if 'phi' not in value or 'magnitudes' not in value:
            raise ConfigError("zeta ray needs 'phi' and 'magnitudes'")
        phi = float(value['phi'])
        return tuple(_snap(float(r) * complex(np.cos(phi), np.sin(phi))) for r in value['magnitudes'])
    if not isinstance(value, (list, tuple)):
        value = [value]
    return tuple(parse_complex(z) for z in value)


def _parse_margin(value) -> Optional[float]:
    if value is None or value is False:
        return None
    if value is True:
        return DEFAULT_INTERIOR_MARGIN
    margin = float(value)
    if not 0.0 < margin < 0.5:
        raise ConfigError(f"interior_margin must be a fraction in (0, 0.5), got {margin}")
    return margin


def build_run_config(raw: Dict[str, Any], source: Optional[str] = None) -> RunConfig:
    unknown = set(raw) - set(DEFAULTS) - {'name', 'description'}
    if unknown:
        raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
    data = dict(DEFAULTS)
    data.update({k: v for k, v in raw.items() if k in DEFAULTS})

    mode = data['mode']
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    ratio = int(data['ratio'])
    if ratio < MIN_RATIO:
        raise ConfigError(f"ratio must be >= {MIN_RATIO}, got {ratio}")
    zeta_raw = data['zeta_grid']
    if mode == 'rho-flat' and 'zeta_grid' not in raw:
        zeta_raw = list(RHO_FLAT_OFFSETS)
    zeta_grid = parse_zeta_grid(zeta_raw)
    if mode == 'rho-flat' and any(z.imag != 0.0 for z in zeta_grid):
        raise ConfigError("rho-flat zeta_grid entries are real offsets from c_flat")
    criteria = data['criteria']
    if criteria is not None:
        criteria = tuple(c if isinstance(c, str) else dict(c) for c in criteria)
    jobs = int(data['jobs'])
    if jobs < 1:
        raise ConfigError(f"jobs must be positive, got {jobs}")
    cell_n = data['cell_n']
    return RunConfig(
        model=data['model'],
        cell_n=int(cell_n) if cell_n is not None else None,
        ratio=ratio,
        eps_inverse=parse_eps_grid(data['eps_grid']),
        zeta_grid=zeta_grid,
        mode=mode,
        smoothing=bool(data['smoothing']),
        boundary_layer=bool(data['boundary_layer']),
        interior_margin=_parse_margin(data['interior_margin']),
        corrector=bool(data['corrector']),
        criteria=criteria,
        gap_samples=int(data['gap_samples']),
        seed=int(data['seed']),
        jobs=jobs,
        out_dir=str(data['out_dir']),
        record_wallclock=bool(data['record_wallclock']),
        c_flat=float(data['c_flat']) if data['c_flat'] is not None else None,
        source=source,
    )


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a JSON config (optional), apply overrides whose value is not None."""
    raw: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config {path} is not valid JSON: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    config = build_run_config(raw, source=path)
    logger.debug("Run config: %s", config)
    return config
