import numpy as np
import pytest

from sivsim.defaults import device_params


@pytest.fixture(scope="session")
def device():
    return device_params()


@pytest.fixture(scope="session")
def device_no_qubit_decay():
    return device_params(gamma_t=0.0)


@pytest.fixture(scope="session")
def fast_device():
    """Same cooperativity as the device but 10x faster optical decay, so
    weak-drive pumping tests finish quickly."""
    return device_params(g=6.81 * np.sqrt(10.0), gamma=1.0, gamma_t=0.0)
