import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric(rng, d):
    A = rng.standard_normal((d, d))
    return 0.5 * (A + A.T)


def random_spd(rng, d):
    G = rng.standard_normal((d, d))
    return G @ G.T + d * np.eye(d)
