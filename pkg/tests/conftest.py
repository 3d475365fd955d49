import numpy as np
import pytest

from se3diffuse.scenario import make_toy_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def toy():
    return make_toy_scenario(seed=7)
