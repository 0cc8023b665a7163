import numpy as np
import pytest

from triphase import InterferometerSpec, gaussian_prior
from triphase.bounds import ZZSettings


@pytest.fixture(scope="session")
def dft_spec():
    return InterferometerSpec()


@pytest.fixture(scope="session")
def flat_spec():
    """Zero-information interferometer: p(x|phi) = (1, 0, 0) for every phi."""
    return InterferometerSpec(np.eye(3), np.eye(3), 0)


@pytest.fixture(scope="session")
def fig3_prior():
    return gaussian_prior([1.1, 2.0], 0.25, 0.0)


@pytest.fixture(scope="session")
def fast_zz():
    """Coarse ZZ settings for smoke tests that only need finite, positive values."""
    return ZZSettings(tau_points=16, quad_grid=16)
