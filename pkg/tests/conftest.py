import numpy as np
import pytest
from hypothesis import settings

from lortori.metric import conformal, flat, sheared

settings.register_profile("lortori", deadline=None, max_examples=40)
settings.load_profile("lortori")


@pytest.fixture(scope="session")
def flat_spec():
    return flat()


@pytest.fixture(scope="session")
def conf_spec():
    return conformal(0.1)


@pytest.fixture(scope="session")
def shear_spec():
    return sheared(0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
