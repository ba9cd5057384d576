import numpy as np
import pytest

from memflow.assembly import assemble_static
from memflow.femspace import MiniSpace
from memflow.mesh import unit_square_mesh


@pytest.fixture(scope="session")
def space4():
    return MiniSpace(unit_square_mesh(4))


@pytest.fixture(scope="session")
def space8():
    return MiniSpace(unit_square_mesh(8))


@pytest.fixture(scope="session")
def ops4(space4):
    return assemble_static(space4)


@pytest.fixture(scope="session")
def ops8(space8):
    return assemble_static(space8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
