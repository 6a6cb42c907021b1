import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lenspdma.codebook import beamsteering_codebook
from lenspdma.lens_array import LensArrayConfig, UpaConfig

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def lens():
    return LensArrayConfig()


@pytest.fixture(scope="session")
def upa():
    return UpaConfig()


@pytest.fixture(scope="session")
def codebook(upa):
    return beamsteering_codebook(upa, 256)


@pytest.fixture(scope="session")
def small_codebook(upa):
    return beamsteering_codebook(upa, 64)


def genie_power(discrete):
    return np.sum(np.abs(discrete.beta) ** 2, axis=(0, 1))


def rad(deg):
    return math.radians(deg)
