import numpy as np
import pytest

from cacc_dift.comm import LinkModel
from cacc_dift.sim import PlatoonConfig, synthetic_leader


@pytest.fixture(scope="session")
def oscillating():
    return synthetic_leader("oscillating", T=0.1, duration=240.0)


@pytest.fixture
def perfect_cfg():
    return PlatoonConfig(link_model=LinkModel.fixed(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
