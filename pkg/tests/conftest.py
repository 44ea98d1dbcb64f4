"""
Shared fixtures
"""
import numpy as np
import pytest

from midasme.services.design_service import MeVariances, MixedSeries, align_mixed
from midasme.services.dgp_service import DgpParams, simulate_sample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def design_params():
    """Simulation design with rho=(0.3, 0.2), b=1, theta=2, jmax=9, m=3"""
    return DgpParams(T=120, me=MeVariances(sigma_u2=0.5, sigma_v2=0.5))


@pytest.fixture
def clean_params():
    return DgpParams(T=500, me=MeVariances())


@pytest.fixture
def random_design(rng):
    """Small random mixed-frequency design with p=2, jmax=6, m=3"""
    T, m = 40, 3
    series = MixedSeries(y_obs=rng.normal(size=T), x_obs=rng.normal(size=T * m), m=m)
    return align_mixed(series, p=2, jmax=6)


@pytest.fixture
def me_sample():
    params = DgpParams(T=500, me=MeVariances(sigma_u2=0.5, sigma_v2=0.5))
    return params, simulate_sample(params, master_seed=3)
