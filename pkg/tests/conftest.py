import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def bell_vector():
    v = np.zeros(4)
    v[0] = v[3] = 1 / np.sqrt(2)
    return v
