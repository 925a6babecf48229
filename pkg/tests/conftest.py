import numpy as np
import pytest

from spdelab.core.estimators import MCParams
from spdelab.core.nonlinearity import build_nonlinearity
from spdelab.core.spectral import SpectralModel


@pytest.fixture
def default_model() -> SpectralModel:
    return SpectralModel.create_default()


@pytest.fixture
def small_model() -> SpectralModel:
    return SpectralModel.create_default(n=2)


@pytest.fixture
def ou1_model() -> SpectralModel:
    """One mode with a_1 = -1/2 and R = I, so H_R coordinates equal plain ones."""
    return SpectralModel(n=1, q_eigs=np.array([1.0]), beta=1.0, rho=0.0)


@pytest.fixture
def zero_G():
    return build_nonlinearity("zero")


@pytest.fixture
def radial_G():
    return build_nonlinearity("radial-direction", {"target_M": 0.1})


@pytest.fixture
def small_params() -> MCParams:
    return MCParams(n_paths=4000, n_inner=8, n_inner_d3=4, dt=1e-2, seed=7, block_size=512)
