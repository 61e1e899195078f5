import numpy as np
import pytest
from hypothesis import settings

from spectral_lab.lattice import FourierLattice, Subdomain
from spectral_lab.spectral import assemble_operator, eigendata, laplacian_symbol

settings.register_profile("lab", max_examples=40, deadline=None)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lat1():
    return FourierLattice(1, 16)


@pytest.fixture(scope="session")
def heat_basis():
    """-Laplace + 1 on T^1 with 129 modes, lambda <= 70."""
    lat = FourierLattice(1, 64)
    return eigendata(assemble_operator(laplacian_symbol(lat)), 70.0)


@pytest.fixture(scope="session")
def sensor():
    return Subdomain.interval(0.0, 0.3)
