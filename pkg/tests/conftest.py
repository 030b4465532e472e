import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bihamlab.sampling import random_state

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[2, 3, 5])
def n(request):
    return request.param


@pytest.fixture
def state(rng):
    return random_state(3, rng)
