import numpy as np
import pytest

from grushinlab import Grid, discretize, eigensolve, make_power_potential


@pytest.fixture(scope="session")
def oscillator():
    return make_power_potential(1.0, 2.0, 1)


@pytest.fixture(scope="session")
def osc_fine(oscillator):
    """Oscillator spectrum below 45 on L=10, N=2000."""
    return eigensolve(discretize(oscillator, Grid(1, 10.0, 2000)), cutoff=45.0)


@pytest.fixture(scope="session")
def osc_coarse(oscillator):
    return eigensolve(discretize(oscillator, Grid(1, 10.0, 400)), count=40)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
