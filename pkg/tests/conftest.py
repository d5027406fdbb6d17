import numpy as np
import pytest

from wplab.jacobi import JacobiSystem
from wplab.mesh import triangulate
from wplab.surface import build_surface
from wplab.variation import covering_scenario, identity_scenario, twisted_scenario


@pytest.fixture(scope="session")
def genus2():
    return build_surface(2)


@pytest.fixture(scope="session")
def base_domain(genus2):
    return triangulate(genus2, 3)


@pytest.fixture(scope="session")
def base_domain2(genus2):
    return triangulate(genus2, 2)


@pytest.fixture(scope="session")
def cover():
    """Degree-2 covering scenario at level 3, its t=0 minimiser solved once."""
    sc = covering_scenario(2, 2, 3)
    sc.critical()
    return sc


@pytest.fixture(scope="session")
def cover_critical(cover):
    return cover.critical()[0]


@pytest.fixture(scope="session")
def cover_mus(cover):
    return cover.mu_list(3, 6)


@pytest.fixture(scope="session")
def cover_jacobi(cover_critical):
    return JacobiSystem(cover_critical)


@pytest.fixture(scope="session")
def cover_interp_jacobi(cover):
    return JacobiSystem(cover.initial)


@pytest.fixture(scope="session")
def identity2():
    sc = identity_scenario(2, 2)
    sc.critical()
    return sc


@pytest.fixture(scope="session")
def twisted():
    sc = twisted_scenario(2, 3)
    sc.critical()
    return sc


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
