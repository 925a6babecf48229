import numpy as np
import pytest

from spdelab.core.base import FieldClass, ScalarField
from spdelab.core.errors import ArgumentError, ConfigurationError
from spdelab.core.fields.catalog import constant_field, holder_field, sine_field
from spdelab.core.regularizer import (
    EnvelopeConfig,
    brute_force_envelope_1d,
    InterpolationProbe,
    KBound,
    k_functional,
    length_scale,
    ll_regularize,
    ll_values,
    localization_radii,
    search_radii,
    verify_ll_bounds,
)

EPS = 0.01


@pytest.fixture
def cfg() -> EnvelopeConfig:
    return EnvelopeConfig(epsilon=EPS, grid_resolution=401)


def test_constant_field_is_its_own_envelope(default_model, cfg):
    result = ll_regularize(constant_field(default_model, 0.7), np.zeros(8), cfg, default_model)
    assert result.value == 0.7
    assert not np.any(result.h_star)
    assert not np.any(result.k_star)


def test_envelope_vanishes_at_the_minimum(ou1_model, cfg):
    result = ll_regularize(holder_field(ou1_model, 0.5), np.zeros(1), cfg, ou1_model)
    assert result.value == pytest.approx(0.0, abs=1e-3)
    assert not result.boundary_hit


@pytest.mark.parametrize("x", [0.02, 0.05, 0.3])
def test_envelope_matches_brute_force(x, ou1_model, cfg):
    f = holder_field(ou1_model, 0.5)
    result = ll_regularize(f, np.array([x]), cfg, ou1_model)
    brute = brute_force_envelope_1d(lambda s: np.minimum(np.abs(x + s) ** 0.5, 1.0), EPS, search_radii(f, cfg))
    assert result.value == pytest.approx(brute, abs=2e-3)


def test_envelope_lies_between_bounds(ou1_model, cfg):
    f = holder_field(ou1_model, 0.5)
    points = np.linspace(-0.5, 0.5, 7)[:, None]
    values = np.array([r.value for r in ll_values(f, points, cfg.replace(threads=2), ou1_model)])
    fx = f.eval(points)
    assert np.all(values <= fx + 1e-3)
    assert np.all(values >= -f.sup_bound)


def test_serial_and_threaded_values_agree(ou1_model, cfg):
    f = holder_field(ou1_model, 0.5)
    points = np.array([[0.1], [-0.2], [0.4]])
    serial = [r.value for r in ll_values(f, points, cfg, ou1_model)]
    threaded = [r.value for r in ll_values(f, points, cfg.replace(threads=3), ou1_model)]
    assert serial == threaded


def test_smaller_epsilon_gives_a_closer_envelope(ou1_model, cfg):
    f = holder_field(ou1_model, 0.5)
    x = np.array([0.05])
    fx = float(f.eval(x[None, :])[0])
    coarse = fx - ll_regularize(f, x, cfg.replace(epsilon=0.04), ou1_model).value
    fine = fx - ll_regularize(f, x, cfg.replace(epsilon=0.0025), ou1_model).value
    assert coarse > 0.0
    assert fine < coarse


def test_localization_radii_use_the_holder_bound(ou1_model):
    f = holder_field(ou1_model, 0.5)
    k_bound, h_bound = localization_radii(f, EPS)
    assert k_bound < np.sqrt(4.0 * EPS)
    assert h_bound == pytest.approx(np.sqrt(2.0 * EPS ** (4.0 / 3.0)))
    assert length_scale(f, EPS) == pytest.approx(EPS ** (2.0 / 3.0))


def test_envelope_config_validation():
    with pytest.raises(ArgumentError):
        EnvelopeConfig(epsilon=0.0)
    with pytest.raises(ConfigurationError):
        EnvelopeConfig(epsilon=EPS, optimizer="newton")
    with pytest.raises(ConfigurationError):
        EnvelopeConfig(epsilon=EPS, search_radius_inner=-1.0)


def test_subspace_larger_than_model(ou1_model):
    with pytest.raises(ConfigurationError):
        ll_regularize(holder_field(ou1_model), np.zeros(1), EnvelopeConfig(epsilon=EPS, subspace_dims=2), ou1_model)


def test_k_functional_respects_trivial_splits(ou1_model, cfg):
    f = sine_field(ou1_model)
    bound = k_functional(f, 0.01, 0.5, ou1_model, cfg)
    assert bound.bound <= bound.trivial_sup
    assert bound.bound <= bound.trivial_xfrak
    assert bound.trivial_xfrak == pytest.approx(0.01 * f.xfrak_norm)
    assert bound.bound == min(bound.decomposition, bound.trivial)
    with pytest.raises(ArgumentError):
        k_functional(f, 0.0, 0.5, ou1_model, cfg)


def test_a_losing_decomposition_is_not_hidden_by_the_trivial_splits():
    losing = KBound(r=1.0, bound=1.0, decomposition=2.5, trivial_sup=1.0, trivial_xfrak=None)
    winning = KBound(r=0.25, bound=0.4, decomposition=0.4, trivial_sup=1.0, trivial_xfrak=0.5)
    probe = InterpolationProbe(alpha=0.5, bounds=[losing, winning])
    assert losing.trivial == 1.0
    assert winning.trivial == 0.5
    assert probe.excess_over_trivial == pytest.approx(1.5)
    assert probe.weighted == pytest.approx([2.5, 0.8])
    assert probe.norm == pytest.approx(2.5)


def test_constant_field_bounds_are_degenerate(ou1_model):
    report = verify_ll_bounds(constant_field(ou1_model, 0.3), [0.04, 0.02, 0.01, 0.005], ou1_model)
    assert report.degenerate
    assert report.nonnegative
    assert report.bounded
    assert report.error_fit is None


def test_bounds_need_a_bounded_field(ou1_model):
    unbounded = ScalarField(name="linear", eval=lambda x: x[:, 0], declared_class=FieldClass.SMOOTH)
    with pytest.raises(ConfigurationError):
        verify_ll_bounds(unbounded, [0.04, 0.02, 0.01, 0.005], ou1_model)
