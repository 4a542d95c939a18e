import numpy as np
import pytest

from clusterlut import LayerBundle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_bundle(rng, rows=8, cols=8, n_samples=16) -> LayerBundle:
    return LayerBundle(rng.standard_normal((rows, cols)),
                       rng.standard_normal((n_samples, cols)))


@pytest.fixture
def small_bundle(rng):
    return random_bundle(rng)
