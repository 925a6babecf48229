import numpy as np
import pytest

from spdelab.core.base import FieldClass, ScalarField
from spdelab.core.errors import ConfigurationError
from spdelab.core.fields.catalog import builtin_fields, certified_holder_constant, holder_field, parse_field, sine_field
from spdelab.core.fields.seminorms import (
    SeminormProbe,
    ball_points,
    brute_force_zygmund_1d,
    holder_seminorm,
    sup_seminorm,
    unit_hr_directions,
    zygmund_seminorm,
)
from spdelab.core.spectral import hr_inner, hr_norm


def test_catalog_spans_every_class(default_model):
    fields = builtin_fields(default_model)
    assert len(fields) == 7
    assert {f.declared_class for f in fields.values()} == set(FieldClass)
    assert "holder:alpha=0.5" in fields


def test_parse_field_arguments(default_model):
    f = parse_field("sin:omega=50", default_model)
    assert f.metadata["omega"] == 50.0
    assert f.declared_class is FieldClass.XFRAK
    g = parse_field("holder:alpha=0.25,index=1", default_model)
    assert g.alpha == 0.25
    assert g.holder_seminorm == pytest.approx(0.5**0.25 * certified_holder_constant(0.25))


@pytest.mark.parametrize("spec", ["cosine", "sin:omega", "sin:omega=fast", "sin:speed=2", "holder:alpha=1.5", "ramp:width=0"])
def test_parse_field_errors(spec, default_model):
    with pytest.raises(ConfigurationError):
        parse_field(spec, default_model)


def test_constant_field(default_model):
    f = parse_field("const:c=3", default_model)
    assert f.is_constant
    np.testing.assert_array_equal(f(np.zeros((4, 8))), np.full(4, 3.0))


def test_sine_gradient_matches_directional_difference(default_model):
    f = sine_field(default_model, omega=2.0, index=1)
    x = ball_points(default_model, 5, seed=1)
    h = unit_hr_directions(default_model, 1, seed=2, include_axis=False)[0]
    step = 1e-6
    fd = (f.eval(x + step * h) - f.eval(x - step * h)) / (2.0 * step)
    np.testing.assert_allclose(hr_inner(f.grad_R(x), h, default_model), fd, atol=1e-7)


def test_certified_holder_constant_is_one():
    assert certified_holder_constant(0.5) == pytest.approx(1.0, abs=1e-9)


def test_probe_directions_are_unit(default_model):
    dirs = unit_hr_directions(default_model, 6, seed=4)
    np.testing.assert_allclose(hr_norm(dirs, default_model), 1.0)
    np.testing.assert_allclose(dirs[0], default_model.unit_hr(0))
    pts = ball_points(default_model, 10, radius=2.0, seed=4)
    assert not np.any(pts[0])
    assert np.max(np.linalg.norm(pts, axis=1)) <= 2.0


def test_probe_scales_must_decrease(default_model):
    with pytest.raises(ConfigurationError):
        SeminormProbe(np.zeros((1, 8)), unit_hr_directions(default_model, 1), [0.1, 0.2, 0.05])
    with pytest.raises(ConfigurationError):
        SeminormProbe(np.zeros((1, 8)), unit_hr_directions(default_model, 1), [0.5, 0.25])


def test_constant_seminorms_vanish(default_model):
    f = parse_field("const:c=2", default_model)
    probe = SeminormProbe.create_default(default_model)
    assert holder_seminorm(f, 0.5, probe).estimate == 0.0
    assert zygmund_seminorm(f, probe).estimate == 0.0
    assert sup_seminorm(f, probe) == 2.0


def test_affine_field_has_no_zygmund_quotient(default_model):
    affine = ScalarField(name="affine", eval=lambda x: 2.0 * x[:, 0] - x[:, 3] + 1.0, declared_class=FieldClass.SMOOTH)
    result = zygmund_seminorm(affine, SeminormProbe.create_default(default_model, kind="zygmund"))
    assert result.estimate < 1e-9


def test_holder_probe_respects_certified_seminorm(default_model):
    f = holder_field(default_model, 0.5)
    result = holder_seminorm(f, 0.5, SeminormProbe.create_default(default_model, alpha=0.5))
    assert 0.0 < result.estimate <= f.holder_seminorm * (1.0 + 1e-9)
    assert len(result.per_scale) == 8


def test_lipschitz_field_quotients_shrink_with_scale(default_model):
    f = sine_field(default_model)
    result = holder_seminorm(f, 0.5, SeminormProbe.create_default(default_model, alpha=0.5))
    # |f(x+h) - f(x)| <= ||h||_R for sin(x_1), so the quotient is at most sqrt(scale)
    assert np.all(result.per_scale <= np.sqrt(result.scales) * (1.0 + 1e-9))
    assert result.growth_slope() > 0.0


def test_zygmund_quotient_of_a_kink():
    scales = np.array([0.5, 0.25, 0.125, 0.008])
    values = brute_force_zygmund_1d(np.abs, scales)
    # |s+2h| - 2|s+h| + |s| peaks at 2h when s = -h
    np.testing.assert_allclose(values, 2.0, atol=1e-9)
