import numpy as np
import pytest

from fqlems import cycle as cycmod
from fqlems import powertrain


@pytest.fixture(scope="session")
def model():
    """One calibrated powertrain shared by every test that needs physics."""
    return powertrain.PowertrainModel.build()


@pytest.fixture(scope="session")
def udds(model):
    return cycmod.derive_power(cycmod.resolve_cycle("udds"), model.vehicle)


@pytest.fixture(scope="session")
def nedc(model):
    return cycmod.derive_power(cycmod.resolve_cycle("nedc"), model.vehicle)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260822)
