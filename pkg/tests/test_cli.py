import json

import pytest

from homog.io_utils import read_json
from homogenize import build_parser, main, overrides_from_args


def _load(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def test_overrides_from_args():
    args = build_parser().parse_args(['sweep', '--phi', '3.14159', '--mags', '1', '4', '--no-smoothing'])
    overrides = overrides_from_args(args)
    assert overrides['zeta_grid'] == {'phi': 3.14159, 'magnitudes': [1.0, 4.0]}
    assert overrides['smoothing'] is False
    assert overrides['corrector'] is None

    args = build_parser().parse_args(['solve', '--zeta-re', '-1', '--zeta-im', '0.5', '--criteria', 'a,b'])
    overrides = overrides_from_args(args)
    assert overrides['zeta_grid'] == ['-1+0.5j']
    assert overrides['criteria'] == ['a', 'b']


def test_cell_command(tmp_path, registry):
    out = tmp_path / 'constant_cell.json'
    assert main(['cell', '--model', 'constant', '--cell-n', '16', '--out', str(out)]) == 0
    data = _load(out)
    assert data['model'] == 'constant'


def test_effective_command_reports_magnetic_form(tmp_path, registry):
    out = tmp_path / 'magnetic.json'
    assert main(['effective', '--model', 'magnetic-1d', '--cell-n', '64', '--out', str(out)]) == 0
    assert 'magnetic' in _load(out)


def test_solve_command_writes_fields(tmp_path, registry):
    code = main(['solve', '--model', 'scalar-1d-sine', '--eps', '16', '--zeta-re', '-1', '--cell-n', '256',
                 '--out', str(tmp_path)])
    assert code == 0
    for suffix in ('u_eps', 'u0', 'v_eps'):
        assert (tmp_path / f'scalar-1d-sine_eps16_{suffix}.json').exists()


def test_positive_real_zeta_is_a_config_error(tmp_path, registry):
    code = main(['solve', '--model', 'constant', '--eps', '8', '--zeta-re', '1', '--cell-n', '16',
                 '--out', str(tmp_path)])
    assert code == 1


def test_unknown_model(registry):
    assert main(['cell', '--model', 'no-such-model']) == 1


def test_sweep_then_report(tmp_path, registry):
    assert main(['sweep', '--model', 'constant', '--eps', '4', '8', '--zeta-re', '-1', '--cell-n', '16',
                 '--out', str(tmp_path)]) == 0
    csv_path = tmp_path / 'sweep.csv'
    assert csv_path.exists()
    meta = read_json(str(tmp_path / 'sweep_meta.json'))
    assert meta['model'] == 'constant'

    # constant coefficients give exact answers: lower-bound rates pass, bounded rates fail
    assert main(['report', '--csv', str(csv_path), '--criteria', 'h1_corr_rate']) == 0
    assert main(['report', '--csv', str(csv_path), '--criteria', 'l2_rate']) == 3
    assert (tmp_path / 'report.json').exists()


def test_verify_command(tmp_path, registry):
    code = main(['verify', '--model', 'constant', '--eps', '4', '8', '--zeta-re', '-1', '--cell-n', '16',
                 '--criteria', 'h1_corr_rate', '--out', str(tmp_path)])
    assert code == 0
    report = _load(tmp_path / 'report.json')
    assert report['passed'] is True


def test_report_on_missing_csv(tmp_path):
    assert main(['report', '--csv', str(tmp_path / 'absent.csv')]) == 1


def test_bad_command_exits():
    with pytest.raises(SystemExit):
        main(['explode'])
