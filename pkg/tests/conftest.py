import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, dim, jitter=0.5):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + jitter * np.eye(dim)
