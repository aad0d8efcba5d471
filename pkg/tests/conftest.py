import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sphere_points(rng, count, dim):
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
