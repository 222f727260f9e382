import pytest

from mcm.polyring import PolyRing, Ring
from mcm.schedule import MCMConfig, build_schedule


@pytest.fixture
def f101():
    return PolyRing(Ring.prime_field(101), 3)


@pytest.fixture(scope="session")
def tight320():
    return build_schedule(MCMConfig(3, 2, 0), "tight")


@pytest.fixture(scope="session")
def mock420():
    return build_schedule(MCMConfig(4, 2, 0), "mock")
