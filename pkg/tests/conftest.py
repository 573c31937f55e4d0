import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from homog.bvp_solver import build_mesh
from homog.model_zoo import build_1d_scalar, build_constant
from homog.periodic_core import grid_points, make_cubic_lattice, make_field
import model_registry


@pytest.fixture(scope='session')
def sine_problem():
    return build_1d_scalar('2 + sin(2*pi*x1)', name='scalar-1d-sine')


@pytest.fixture(scope='session')
def constant_problem():
    return build_constant(2.0, dim=1)


@pytest.fixture
def unit_mesh_1d():
    return build_mesh([[0.0, 1.0]], 1 / 256)


@pytest.fixture
def unit_mesh_2d():
    return build_mesh([[0.0, 1.0], [0.0, 1.0]], 1 / 32)


@pytest.fixture
def registry():
    model_registry.clear_cache()
    yield model_registry
    model_registry.clear_cache()


@pytest.fixture
def random_positive_field():
    """Factory for seeded smooth Hermitian positive fields A(y)A(y)* + 0.3 I
    with A a trigonometric polynomial of degree ``modes``."""
    def make(seed, d=2, size=2, n_grid=16, modes=2, scalar=False):
        rng = np.random.default_rng(seed)
        y = grid_points(n_grid, d).reshape(-1, d)
        ks = np.stack(np.meshgrid(*([np.arange(-modes, modes + 1)] * d), indexing='ij'), axis=-1).reshape(-1, d)
        rows = 1 if scalar else size
        coef = (rng.standard_normal((len(ks), rows, rows)) + 1j * rng.standard_normal((len(ks), rows, rows)))
        coef *= 0.5 / len(ks) ** 0.5
        A = np.einsum('pk,kab->pab', np.exp(2j * np.pi * y @ ks.T), coef)
        values = A @ np.conj(np.swapaxes(A, -1, -2)) + 0.3 * np.eye(rows)
        if scalar:
            values = values * np.eye(size)
        return make_field(values.reshape((n_grid,) * d + (size, size)), make_cubic_lattice(d))
    return make
