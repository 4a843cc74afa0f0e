import functools

import numpy as np
import pytest
from hypothesis import settings

from shubin import model_operator
from shubin import spectral as sc

settings.register_profile("fixed", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("fixed")


@functools.lru_cache(maxsize=None)
def converged(n, m, k, J, tol):
    P = model_operator(n, m, k)
    return sc.convergence_study(P, J, tol)


@pytest.fixture(scope="session")
def h22_400():
    return converged(1, 2, 2, 400, 1e-10)[1]


@pytest.fixture(scope="session")
def h24_400():
    return converged(1, 2, 4, 400, 1e-8)[1]


@pytest.fixture(scope="session")
def h24_small():
    return converged(1, 2, 4, 60, 1e-10)[1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
