import numpy as np
import pytest

from kinex import REFERENCE_MU, make_params, solve_equilibrium


@pytest.fixture(scope="session")
def params15():
    return make_params()


@pytest.fixture(scope="session")
def eq_ref(params15):
    """Reference equilibrium of the default regime, shared across tests."""
    return solve_equilibrium(params15, REFERENCE_MU)


def random_simplex(rng, n):
    x = rng.random(n) + 1e-3
    return x / x.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
