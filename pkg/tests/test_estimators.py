import math

import numpy as np
import pytest

from spdelab.core.base import MCEstimate
from spdelab.core.errors import ArgumentError, ConfigurationError, ContractError
from spdelab.core.estimators import (
    MCParams,
    OUMarginalOracle,
    OUSampler,
    OUSineOracle,
    bel_d1,
    bel_d1_smooth,
    bel_d2,
    bel_d2_smooth,
    bel_d3,
    closed_form_oracle,
    estimate_pt,
    fd_oracle,
    fd_step,
    holder_transport_check,
    make_sampler,
)
from spdelab.core.fields.catalog import constant_field, gauss_field, holder_field, sine_field

X = np.array([0.5, 0.0])


def test_constant_fields_are_exact(small_model, zero_G, small_params):
    est = estimate_pt(constant_field(small_model, 2.5), 0.3, X, small_model, zero_G, small_params)
    assert est.value == 2.5
    assert est.std_error == 0.0
    assert est.metadata["exact"]


def test_time_zero_is_exact(small_model, radial_G, small_params):
    est = estimate_pt(sine_field(small_model), 0.0, X, small_model, radial_G, small_params)
    assert est.value == pytest.approx(math.sin(0.5))
    assert est.std_error == 0.0


def test_sine_oracle_matches_marginal_quadrature(small_model):
    sine = OUSineOracle(small_model, omega=1.0)
    marginal = OUMarginalOracle(small_model, np.sin)
    h = small_model.unit_hr(0)
    for order in range(4):
        dirs = [h] * order
        assert marginal.derivative(order, 0.3, X, *dirs) == pytest.approx(sine.derivative(order, 0.3, X, *dirs), abs=1e-7)


def test_closed_form_oracle_dispatch(small_model):
    assert isinstance(closed_form_oracle(sine_field(small_model, 2.0), small_model), OUSineOracle)
    assert isinstance(closed_form_oracle(holder_field(small_model, 0.5), small_model), OUMarginalOracle)
    with pytest.raises(ConfigurationError):
        closed_form_oracle(gauss_field(small_model), small_model)


def test_pt_agrees_with_oracle(small_model, zero_G, small_params):
    est = estimate_pt(sine_field(small_model), 0.5, X, small_model, zero_G, small_params)
    target = OUSineOracle(small_model).value(0.5, X)
    assert est.agrees_with(target, n_sigma=4.0, atol=5e-3)


def test_first_derivative_estimators_agree_with_oracle(small_model, zero_G, small_params):
    f = sine_field(small_model)
    h = small_model.unit_hr(0)
    target = OUSineOracle(small_model).d1(0.5, X, h)
    assert bel_d1(f, 0.5, X, h, small_model, zero_G, small_params).agrees_with(target, n_sigma=4.0, atol=0.02)
    assert bel_d1_smooth(f, 0.5, X, h, small_model, zero_G, small_params).agrees_with(target, n_sigma=4.0, atol=0.01)


@pytest.mark.slow
def test_second_derivative_agrees_with_oracle(small_model, zero_G, small_params):
    f = sine_field(small_model)
    h = small_model.unit_hr(0)
    target = OUSineOracle(small_model).d2(0.5, X, h, h)
    est = bel_d2(f, 0.5, X, h, h, small_model, zero_G, small_params)
    assert est.op == "bel_d2"
    assert est.agrees_with(target, n_sigma=4.0, atol=0.03)


def test_smooth_second_derivative_agrees_with_oracle(small_model, zero_G, small_params):
    f = sine_field(small_model)
    h = small_model.unit_hr(0)
    target = OUSineOracle(small_model).d2(0.5, X, h, h)
    est = bel_d2_smooth(f, 0.5, X, h, h, small_model, zero_G, small_params)
    assert est.op == "bel_d2_smooth"
    assert est.agrees_with(target, n_sigma=4.0, atol=0.01)


@pytest.mark.slow
def test_third_derivative_agrees_with_oracle(small_model, zero_G, small_params):
    f = sine_field(small_model)
    h = small_model.unit_hr(0)
    target = OUSineOracle(small_model).derivative(3, 0.5, X, h, h, h)
    est = bel_d3(f, 0.5, X, h, h, h, small_model, zero_G, small_params)
    assert est.op == "bel_d3"
    assert est.n_inner == small_params.n_inner_d3
    assert est.agrees_with(target, n_sigma=4.0, atol=0.05)


def test_mehler_weights_agree_with_oracle(small_model):
    f = sine_field(small_model)
    h = small_model.unit_hr(0)
    sampler = OUSampler(small_model)
    Z = sampler.normals(3, 20_000)
    samples = sampler.d1_samples(f, 0.5, X, h, Z)
    se = np.std(samples, ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - OUSineOracle(small_model).d1(0.5, X, h)) <= 4.0 * se


def test_mehler_normals_follow_their_key(small_model):
    sampler = OUSampler(small_model)
    np.testing.assert_array_equal(sampler.normals(3, 8, 1), sampler.normals(3, 8, 1))
    assert not np.array_equal(sampler.normals(3, 8, 1), sampler.normals(3, 8, 2))
    assert not np.array_equal(sampler.normals(3, 8), sampler.normals(3, 8, 1))


def test_smooth_estimator_at_time_zero(small_model, zero_G, small_params):
    h = small_model.unit_hr(0)
    est = bel_d1_smooth(sine_field(small_model), 0.0, X, h, small_model, zero_G, small_params)
    assert est.value == pytest.approx(math.cos(0.5))
    assert est.std_error == 0.0


def test_smooth_estimator_needs_a_gradient(small_model, zero_G, small_params):
    with pytest.raises(ContractError):
        bel_d1_smooth(holder_field(small_model), 0.5, X, small_model.unit_hr(0), small_model, zero_G, small_params)


@pytest.mark.parametrize("t", [0.0, -0.1])
def test_weighted_estimators_need_positive_time(t, small_model, zero_G, small_params):
    with pytest.raises(ArgumentError):
        bel_d1(sine_field(small_model), t, X, small_model.unit_hr(0), small_model, zero_G, small_params)


def test_zero_direction_is_rejected(small_model, zero_G, small_params):
    with pytest.raises(ArgumentError):
        bel_d1(sine_field(small_model), 0.5, X, np.zeros(2), small_model, zero_G, small_params)


def test_crn_finite_difference(small_model, zero_G, small_params):
    f = sine_field(small_model)
    h = small_model.unit_hr(0)
    sampler = make_sampler("estimate_pt", f, 0.5, small_model, zero_G, small_params)
    est = fd_oracle(sampler, X, h, small_model, small_params.n_paths)
    assert est.metadata["step"] == fd_step(small_params.n_paths)
    assert est.agrees_with(OUSineOracle(small_model).d1(0.5, X, h), n_sigma=4.0, atol=0.01)


def test_make_sampler_unknown_op(small_model, zero_G, small_params):
    with pytest.raises(ArgumentError):
        make_sampler("bel_d3", sine_field(small_model), 0.5, small_model, zero_G, small_params)


def test_holder_transport(small_model, radial_G, small_params):
    h = 0.1 * small_model.unit_hr(0)
    report = holder_transport_check(holder_field(small_model, 0.5), 0.2, X, h, small_model, radial_G, small_params)
    assert report.ok
    with pytest.raises(ContractError):
        holder_transport_check(sine_field(small_model), 0.2, X, h, small_model, radial_G, small_params)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        MCParams(n_paths=1)


def test_z_score():
    est = MCEstimate(value=1.2, std_error=0.1, n_outer=100, n_inner=0, seed=0, t=0.5)
    assert est.z_score(1.0) == pytest.approx(2.0)
    assert est.agrees_with(1.0, n_sigma=3.0)
    assert not est.agrees_with(1.0, n_sigma=1.0)
