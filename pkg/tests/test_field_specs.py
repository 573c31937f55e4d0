import numpy as np
import pytest

from homog.errors import ConfigError
from homog.field_specs import (
    compile_expression, compile_spec, constant_spec, expr_spec, format_complex, fourier_spec, parse_complex,
    parse_matrix,
)


def _points(n=16, d=1):
    axes = [np.arange(n) / n] * d
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, d)


@pytest.mark.parametrize('raw, expected', [(2, 2 + 0j), (0.5, 0.5 + 0j), ('0.3+1j', 0.3 + 1j), ('-2j', -2j)])
def test_parse_complex(raw, expected):
    assert parse_complex(raw) == expected


def test_parse_complex_rejects_bool_and_garbage():
    with pytest.raises(ConfigError):
        parse_complex(True)
    with pytest.raises(ConfigError):
        parse_complex('two')


def test_format_complex_keeps_reals_numeric():
    assert format_complex(2.0) == 2.0
    assert parse_complex(format_complex(0.25 - 1.5j)) == 0.25 - 1.5j


def test_parse_matrix_shapes():
    assert parse_matrix(3).shape == (1, 1)
    assert parse_matrix([[1, 0], [0, '2j']])[1, 1] == 2j
    with pytest.raises(ConfigError):
        parse_matrix([[1, 2], [3]])


def test_constant_scalar_expands_to_identity():
    compiled = compile_spec(constant_spec(2.0, shape=(2, 2)), 2)
    values = compiled.evaluate(_points(4, 2))
    np.testing.assert_allclose(values[0], 2 * np.eye(2))
    assert compiled.shape == (2, 2)


def test_expression_matches_numpy():
    compiled = compile_spec(expr_spec('2 + sin(2*pi*x1)'), 1)
    points = _points(64)
    np.testing.assert_allclose(compiled.evaluate(points)[:, 0, 0].real, 2 + np.sin(2 * np.pi * points[:, 0]))


@pytest.mark.parametrize('source', ['__import__("os")', 'x1.real', 'x3 + 1', 'abs(x1)', 'x1 ** x1'])
def test_expression_whitelist(source):
    with pytest.raises(ConfigError):
        compile_expression(source, 2)


def test_fourier_modes_give_cosine():
    compiled = compile_spec(fourier_spec({(0,): 3.0, (1,): 0.5, (-1,): 0.5}), 1)
    points = _points(32)
    np.testing.assert_allclose(compiled.evaluate(points)[:, 0, 0], 3 + np.cos(2 * np.pi * points[:, 0]),
                               atol=1e-14)


def test_fourier_rejects_wrong_wavevector_length():
    with pytest.raises(ConfigError):
        compile_spec({'kind': 'fourier', 'parameters': {'modes': [{'k': [1, 0], 'coef': 1}]}}, 1)


def test_piecewise_is_right_continuous():
    spec = {'kind': 'piecewise', 'parameters': {'axis': 0, 'breaks': [0.0, 0.5], 'values': [1.0, 3.0]}}
    compiled = compile_spec(spec, 1)
    values = compiled.evaluate(np.array([[0.0], [0.25], [0.5], [0.75], [0.999]]))[:, 0, 0].real
    np.testing.assert_array_equal(values, [1, 1, 3, 3, 3])
    assert compiled.piecewise
    assert compiled.breaks == ((0, (0.0, 0.5)),)


def test_piecewise_rejects_bad_breaks():
    spec = {'kind': 'piecewise', 'parameters': {'axis': 0, 'breaks': [0.5, 0.25], 'values': [1, 2]}}
    with pytest.raises(ConfigError):
        compile_spec(spec, 1)


def test_matrix_of_scalar_specs():
    spec = {'kind': 'matrix', 'shape': [2, 2],
            'parameters': {'entries': [[expr_spec('2 + sin(2*pi*x2)'), 0], [0, expr_spec('1 + x1')]]}}
    compiled = compile_spec(spec, 2)
    values = compiled.evaluate(np.array([[0.5, 0.25]]))
    np.testing.assert_allclose(values[0], [[3, 0], [0, 1.5]])


def test_unknown_kind_and_shape_mismatch():
    with pytest.raises(ConfigError):
        compile_spec({'kind': 'spline', 'parameters': {}}, 1)
    with pytest.raises(ConfigError):
        compile_spec(dict(constant_spec([[1, 0]]), shape=[2, 2]), 1)
