import json
from pathlib import Path

import numpy as np
import pytest

from homog.config import RHO_FLAT_OFFSETS, build_run_config, load_run_config, parse_eps_grid, parse_zeta_grid
from homog.errors import ConfigError

CONFIG_DIR = Path(__file__).parent.parent / 'configs'


@pytest.mark.parametrize('raw, expected', [
    ([8, 16], (8, 16)),
    ([0.125, 0.0625], (8, 16)),
    ([1 / 12], (12,)),
    ([], ()),
])
def test_parse_eps_grid(raw, expected):
    assert parse_eps_grid(raw) == expected


@pytest.mark.parametrize('raw', [[0.3], [-4], [8, 0.125], [True], [1.5]])
def test_parse_eps_grid_rejects(raw):
    with pytest.raises(ConfigError):
        parse_eps_grid(raw)


def test_zeta_ray_snaps_to_axis():
    zetas = parse_zeta_grid({'phi': np.pi, 'magnitudes': [1, 4]})
    assert zetas == (-1 + 0j, -4 + 0j)
    assert all(z.imag == 0.0 for z in zetas)


def test_zeta_list_and_scalar():
    assert parse_zeta_grid(['-1', '1+1.5j', -2]) == (-1, 1 + 1.5j, -2)
    assert parse_zeta_grid(-3) == (-3,)
    with pytest.raises(ConfigError):
        parse_zeta_grid({'phi': 1.0})


def test_defaults():
    config = build_run_config({})
    assert config.eps_grid == (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    assert config.zeta_grid == (-1,)
    assert config.cell_grid(1) == 1024
    assert config.cell_grid(2) == 64
    assert config.interior_margin is None


def test_rho_flat_default_offsets():
    config = build_run_config({'mode': 'rho-flat'})
    assert config.zeta_grid == tuple(complex(z) for z in RHO_FLAT_OFFSETS)
    with pytest.raises(ConfigError):
        build_run_config({'mode': 'rho-flat', 'zeta_grid': ['-1+1j']})


@pytest.mark.parametrize('raw', [
    {'ratio': 8},
    {'mode': 'fast'},
    {'jobs': 0},
    {'interior_margin': 0.6},
    {'colour': 'blue'},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        build_run_config(raw)


def test_interior_margin_flag():
    assert build_run_config({'interior_margin': True}).interior_margin == 0.25
    assert build_run_config({'interior_margin': 0.1}).interior_margin == 0.1


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'model': 'laminate-13', 'eps_grid': [4, 8, 12, 16], 'jobs': 2}))
    config = load_run_config(str(path), {'jobs': 3, 'seed': None})
    assert config.jobs == 3
    assert config.seed == 0
    assert config.model_name == 'laminate-13'
    assert config.source == str(path)
    assert config.to_dict()['eps_grid'] == [4, 8, 12, 16]


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / 'absent.json'))
    broken = tmp_path / 'broken.json'
    broken.write_text('{"model": ')
    with pytest.raises(ConfigError):
        load_run_config(str(broken))


@pytest.mark.parametrize('path', sorted(CONFIG_DIR.glob('*.json')), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    config = load_run_config(str(path))
    assert config.out_dir == f'results/{path.stem}'


def test_reference_2d_uses_full_epsilon_grid():
    config = load_run_config(str(CONFIG_DIR / 'reference_2d.json'))
    assert config.eps_grid == (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    assert config.model_name == 'laminate-13'


def test_smoothing_removal_config():
    config = load_run_config(str(CONFIG_DIR / 'smoothing_removal.json'))
    assert 'smoothing_removal' in [c if isinstance(c, str) else c['name'] for c in config.criteria]
    assert config.smoothing is True
    assert len(config.eps_grid) >= 4
