import numpy as np
import pytest

from h2bem.mesh import BasisKind, make_basis, make_sphere_mesh
from h2bem.quadkernel import QuadratureRule


@pytest.fixture(scope="session")
def rule():
    return QuadratureRule(q_reg=2, q_sing=4)


@pytest.fixture(scope="session")
def octahedron():
    return make_sphere_mesh(0)


@pytest.fixture(scope="session")
def sphere128():
    return make_sphere_mesh(2)


@pytest.fixture(scope="session")
def sphere512():
    return make_sphere_mesh(3)


@pytest.fixture(scope="session")
def constants512(sphere512):
    return make_basis(sphere512, BasisKind.PIECEWISE_CONSTANT)


@pytest.fixture(scope="session")
def linears512(sphere512):
    return make_basis(sphere512, BasisKind.PIECEWISE_LINEAR)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
