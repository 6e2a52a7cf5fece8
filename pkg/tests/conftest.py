import pytest

from seem.gateway import MockGateway


@pytest.fixture
def gateway():
    return MockGateway(dim=64, seed=0)


@pytest.fixture
def small_gateway():
    return MockGateway(dim=8, seed=0)
