import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dualgrasp.geometry import TriangleMesh, primitives

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit_cube():
    return TriangleMesh.from_arrays(*primitives.box())


@pytest.fixture(scope="session")
def icosphere():
    return TriangleMesh.from_arrays(*primitives.icosphere(3))


@pytest.fixture(scope="session")
def l_prism():
    return TriangleMesh.from_arrays(*primitives.l_prism(1.0))


@pytest.fixture(scope="session")
def small_cube():
    return TriangleMesh.from_arrays(*primitives.box((0.05, 0.05, 0.05)))


@pytest.fixture(scope="session")
def small_sphere():
    return TriangleMesh.from_arrays(*primitives.icosphere(3, radius=0.035))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
