import numpy as np
import pytest

from tcurvflow.harmonics import SpectralField, coeff_count, degrees_of, get_basis


@pytest.fixture(scope="session")
def basis16():
    """Grid/basis able to handle products of band-8 fields exactly."""
    return get_basis(16)


@pytest.fixture(scope="session")
def basis32():
    return get_basis(32)


def random_field(K, seed, amplitude=1.0, decay=2.0):
    """Seeded random band-limited field with power-law spectral decay."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(coeff_count(K))
    k = degrees_of(K)
    c *= amplitude / (1.0 + k.astype(float)) ** decay
    return SpectralField(K, c)


@pytest.fixture
def make_random_field():
    return random_field
