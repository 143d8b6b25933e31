import pytest

from scaleobs.core import NoiseModel
from scaleobs.trajgen import TrajectorySpec, generate


@pytest.fixture(scope="session")
def straight():
    return generate(TrajectorySpec(kind="straight"))


@pytest.fixture(scope="session")
def circle():
    return generate(TrajectorySpec(kind="circle"))


@pytest.fixture(scope="session")
def figure8():
    return generate(TrajectorySpec(kind="figure8"))


@pytest.fixture(scope="session")
def trajectories(straight, circle, figure8):
    return {"straight": straight, "circle": circle, "figure_eight": figure8}


@pytest.fixture
def bno055():
    return NoiseModel.bno055()
