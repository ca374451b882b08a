import numpy as np
import pytest

from cavitycool.fock import FockSpace


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


def random_density_matrix(rng, dim, support=None):
    """Full-rank random state confined to the lowest ``support`` levels."""
    support = support or dim
    x = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
    rho = np.zeros((dim, dim), dtype=complex)
    rho[:support, :support] = x @ x.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def space128():
    return FockSpace(128)


@pytest.fixture
def space256():
    return FockSpace(256)
