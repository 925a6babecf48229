import numpy as np
import pytest

from spdelab.core.errors import ConfigurationError, FitError
from spdelab.core.fields.catalog import constant_field, holder_field, ramp_field, sine_field
from spdelab.core.rates import (
    DecayProbes,
    derivative_method,
    expected_decay_slope,
    field_norm,
    fit_controllability_rate,
    fit_decay_rate,
    fit_loglog,
)


def test_exact_power_law():
    t = np.geomspace(1e-3, 1e-1, 6)
    fit = fit_loglog(t, 3.0 * t**-0.5)
    assert fit.slope == pytest.approx(-0.5)
    assert fit.intercept == pytest.approx(np.log(3.0))
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    assert fit.within(-0.5, 1e-9)


def test_noisy_points_are_excluded():
    t = np.geomspace(1e-3, 1e-1, 6)
    values = t**-1.0
    errors = np.full(6, 1e-3) * values
    errors[0] = values[0]
    fit = fit_loglog(t, values, errors)
    assert fit.excluded == [pytest.approx(1e-3)]
    assert fit.slope == pytest.approx(-1.0)


def test_too_few_points():
    with pytest.raises(FitError):
        fit_loglog([0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
    with pytest.raises(FitError):
        fit_loglog([0.1, 0.2, 0.3, 0.4], [1.0, 0.0, 3.0, 4.0])


def test_expected_slopes(default_model):
    assert expected_decay_slope(ramp_field(default_model), 2) == -1.0
    assert expected_decay_slope(sine_field(default_model), 1) == 0.0
    assert expected_decay_slope(holder_field(default_model, 0.5), 1) == -0.25


def test_field_norms(default_model):
    assert field_norm(sine_field(default_model, 2.0)) == pytest.approx(3.0)
    assert field_norm(holder_field(default_model, 0.5)) == pytest.approx(2.0, abs=1e-9)
    assert field_norm(ramp_field(default_model)) == 1.0


def test_decay_of_a_lipschitz_field_is_flat(small_model, zero_G, small_params):
    probes = DecayProbes.create_default(small_model, n_random=2, n_directions=2, axis_levels=3)
    fit = fit_decay_rate(sine_field(small_model), probes, 1, np.geomspace(1e-3, 1e-1, 5), small_model, zero_G, small_params, method="oracle")
    assert fit.slope == pytest.approx(0.0, abs=0.05)
    assert fit.metadata["expected"] == 0.0


def test_decay_of_a_bounded_field(small_model, zero_G, small_params):
    probes = DecayProbes.create_default(small_model, n_random=0, n_directions=1, axis_levels=13)
    f = ramp_field(small_model, width=1e-4)
    fit = fit_decay_rate(f, probes, 1, np.geomspace(1e-3, 1e-1, 5), small_model, zero_G, small_params, method="oracle")
    assert fit.slope == pytest.approx(-0.5, abs=0.15)


def test_derivative_method_choices(small_model, zero_G, radial_G, small_params):
    f = constant_field(small_model)
    with pytest.raises(ConfigurationError):
        derivative_method(f, 1, "oracle", small_model, radial_G, small_params)
    with pytest.raises(ConfigurationError):
        derivative_method(f, 3, "smooth", small_model, zero_G, small_params)
    with pytest.raises(ConfigurationError):
        derivative_method(f, 1, "spline", small_model, zero_G, small_params)


def test_controllability_slope(ou1_model):
    fit = fit_controllability_rate(ou1_model, np.geomspace(1e-4, 1e-2, 6))
    assert fit.slope == pytest.approx(-0.5, abs=0.01)
    assert fit.metadata["expected"] == -0.5


def test_bel_decay_slope_tracks_the_closed_form(small_model, zero_G, small_params):
    probes = DecayProbes.create_default(small_model, n_random=0, n_directions=1, axis_levels=13)
    f = ramp_field(small_model, width=1e-4)
    t_grid = np.geomspace(1e-3, 1e-1, 5)
    bel = fit_decay_rate(f, probes, 1, t_grid, small_model, zero_G, small_params, method="bel")
    oracle = fit_decay_rate(f, probes, 1, t_grid, small_model, zero_G, small_params, method="oracle")
    assert bel.metadata["method"] == "bel"
    assert bel.slope == pytest.approx(-0.5, abs=0.15)
    assert bel.slope == pytest.approx(oracle.slope, abs=0.1)
