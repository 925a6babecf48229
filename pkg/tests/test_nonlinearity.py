import numpy as np
import pytest

from spdelab.core.errors import ConfigurationError
from spdelab.core.nonlinearity import NONLINEARITIES, build_nonlinearity, verify_nonlinearity


@pytest.mark.parametrize("name", ["radial-direction", "radial-scaled"])
def test_derivatives_match_finite_differences(name):
    G = build_nonlinearity(name)
    report = verify_nonlinearity(G, n=4, seed=3)
    assert report["d1_mismatch"] < 1e-5
    assert report["d2_mismatch"] < 1e-5
    assert report["d3_mismatch"] < 1e-5
    assert report["sampled_bound"] <= G.M


@pytest.mark.parametrize("name", ["radial-direction", "radial-scaled"])
def test_target_M_rescales_amplitude(name):
    unit = build_nonlinearity(name)
    scaled = build_nonlinearity(name, {"target_M": 0.1})
    assert scaled.M == pytest.approx(0.1)
    assert scaled.amplitude == pytest.approx(0.1 / unit.M)
    x = np.array([[0.3, -0.2, 0.1]])
    np.testing.assert_allclose(scaled.eval(x), scaled.amplitude * unit.eval(x))


def test_zero_nonlinearity(zero_G):
    x = np.ones((2, 3))
    assert zero_G.is_zero
    assert zero_G.M == 0.0
    assert not np.any(zero_G.eval(x))
    assert verify_nonlinearity(zero_G, n=3)["sampled_bound"] == 0.0


def test_radial_direction_points_along_one_axis():
    G = build_nonlinearity("radial-direction", {"index": 1})
    out = G.eval(np.array([[0.5, 0.5, 0.5]]))
    assert out[0, 1] == pytest.approx(np.exp(-0.375))
    assert out[0, 0] == 0.0
    assert out[0, 2] == 0.0


def test_unknown_nonlinearity():
    with pytest.raises(ConfigurationError, match="unknown nonlinearity"):
        build_nonlinearity("cubic")


def test_registry_names():
    assert set(NONLINEARITIES) == {"zero", "radial-direction", "radial-scaled"}
