import numpy as np
import pytest

from pathdyn import GridSpec, VectorField2D, make_analytic

# Grids with power-of-two spacings keep node coordinates and linear-field
# values exactly representable in float32, so exactness assertions hold.


@pytest.fixture(scope="session")
def saddle_field():
    spec = GridSpec((-3.0, -3.0), (3 / 64, 3 / 64), 129, 129, 0.0, 2.0, 3)
    return make_analytic("saddle", spec)


@pytest.fixture(scope="session")
def rotation_field():
    spec = GridSpec((-2.0, -2.0), (1 / 32, 1 / 32), 129, 129, 0.0, 8.0, 3)
    return make_analytic("rigid_rotation", spec)


@pytest.fixture(scope="session")
def constant_field():
    spec = GridSpec((0.0, 0.0), (1 / 16, 1 / 16), 17, 17, 0.0, 1.0, 2)
    return make_analytic("constant", spec)


@pytest.fixture(scope="session")
def double_gyre_field():
    spec = GridSpec((0.0, 0.0), (2 / 127, 1 / 63), 128, 64, 0.0, 10.0, 51)
    return make_analytic("double_gyre", spec)


@pytest.fixture(scope="session")
def two_population_field():
    spec = GridSpec((0.0, -1.0), (4 / 191, 2 / 95), 192, 96, 0.0, 2.0, 3)
    return make_analytic("two_population", spec)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_field(rng, nx=9, ny=7, nt=3, origin=(0.0, 0.0), spacing=(0.25, 0.25),
                 t_min=0.0, t_max=1.0):
    """Small field with random float32 node velocities."""
    spec = GridSpec(origin, spacing, nx, ny, t_min, t_max, nt)
    frames = rng.normal(size=(nt, ny, nx, 2)).astype(np.float32)
    return VectorField2D(spec, frames)
