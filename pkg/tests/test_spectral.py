import math

import numpy as np
import pytest

from spdelab.core.errors import ArgumentError, ConfigurationError
from spdelab.core.spectral import (
    SpectralModel,
    apply_exp_A,
    cappone_majorant,
    compute_constants,
    eigenvalues_from_rule,
    hr_inner,
    hr_norm,
    k_bounds,
)


def test_default_model_coefficients(default_model):
    k = np.arange(1, 9)
    np.testing.assert_allclose(default_model.q_eigs, k**-2.0)
    np.testing.assert_allclose(default_model.a, -0.5 * k**2.0)
    np.testing.assert_allclose(default_model.r, 1.0 / k)
    assert default_model.R_norm == pytest.approx(1.0)
    assert default_model.w_R == pytest.approx(-0.5)


def test_hr_inner_uses_inverse_r(small_model):
    x = np.array([1.0, 0.5])
    y = np.array([2.0, 1.0])
    # r = (1, 1/2): <x, y>_R = 1*2 + 0.5*1*4
    assert hr_inner(x, y, small_model) == pytest.approx(4.0)
    assert hr_norm(small_model.unit_hr(1), small_model) == pytest.approx(1.0)


def test_hr_inner_rejects_wrong_dimension(small_model):
    with pytest.raises(ConfigurationError):
        hr_inner(np.ones(3), np.ones(3), small_model)


def test_apply_exp_A_one_mode(ou1_model):
    out = apply_exp_A(2.0, np.array([1.0]), ou1_model)
    assert out[0] == pytest.approx(math.exp(-1.0))


def test_exp_diag_rejects_negative_time(ou1_model):
    with pytest.raises(ArgumentError):
        ou1_model.exp_diag(-0.1)


def test_zeta_for_zero_and_bounded_nonlinearity(default_model):
    assert compute_constants(default_model, 0.0).zeta_R == pytest.approx(-0.5)
    flat = SpectralModel.create_custom(n=8, q_eigs="k^-2", beta=1.0, rho=0.0)
    assert compute_constants(flat, 0.1).zeta_R == pytest.approx(-0.4)


def test_compute_constants_rejects_negative_M(default_model):
    with pytest.raises(ConfigurationError):
        compute_constants(default_model, -1.0)


def test_k_bounds_values():
    K1, K2 = k_bounds(1.0, 0.0)
    assert (K1, K2) == pytest.approx((1.0, 1.5))
    K1, K2 = k_bounds(math.log(2.0), 1.0)
    assert K1 == pytest.approx(2.0)
    assert K2 == pytest.approx(4.0)


@pytest.mark.parametrize("zeta", [-0.5, -0.1, 0.3, 1.0])
@pytest.mark.parametrize("t", [0.01, 0.5, 2.0])
def test_k_bounds_below_simplified_majorant(t, zeta):
    K1, K2 = k_bounds(t, zeta)
    majorant = cappone_majorant(t, zeta)
    assert K1 <= majorant
    assert K2 <= majorant


def test_k_bounds_needs_positive_time():
    with pytest.raises(ArgumentError):
        k_bounds(0.0, -0.5)


@pytest.mark.parametrize("rule", ["k^2", "k^-x", "sqrt(k)"])
def test_bad_eigenvalue_rules(rule):
    with pytest.raises(ConfigurationError):
        eigenvalues_from_rule(rule, 4)


def test_model_rejects_increasing_eigenvalues():
    with pytest.raises(ConfigurationError):
        SpectralModel(n=2, q_eigs=np.array([0.5, 1.0]))


def test_controllability_norm_small_time_rate(ou1_model):
    t = 1e-4
    assert ou1_model.controllability_norm(t) * math.sqrt(t) == pytest.approx(1.0, rel=1e-3)
