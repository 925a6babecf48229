import math

import numpy as np
import pytest

from spdelab.core.base import FieldClass, ScalarField
from spdelab.core.errors import ArgumentError, ConfigurationError, ContractError, SchemeError
from spdelab.core.estimators import MCParams, OUSineOracle, estimate_pt
from spdelab.core.fields.catalog import constant_field, holder_field, ramp_field, sine_field
from spdelab.core.solvers.evolution import evolve, evolve_probe
from spdelab.core.solvers.probes import SampledMap, default_probe, holder_stabilization, schauder_probe, zygmund_probe
from spdelab.core.solvers.quadrature import QuadratureScheme, decay_rate, grading_exponent, midpoint_nodes
from spdelab.core.solvers.resolvent import (
    direct_derivative_bound,
    require_method,
    resolvent,
    resolvent_d,
    resolvent_identity_check,
    within_contractivity,
)
from spdelab.core.solvers.schvar import SchvarLattice, constant_drift, schvar_solve, zero_drift

X = np.array([0.5, 0.0])


# --- quadrature ----------------------------------------------------------------------------


@pytest.mark.parametrize("order,alpha,expected", [(0, 0.0, 1.0), (1, 0.0, 2.0), (2, 0.5, 4.0)])
def test_grading_exponent(order, alpha, expected):
    assert grading_exponent(order, alpha) == pytest.approx(expected)


def test_grading_rejects_non_integrable_orders():
    with pytest.raises(ConfigurationError):
        grading_exponent(2, 0.0)


def test_decay_rate_switches_at_four_zeta():
    assert decay_rate(3.0, -0.5) == (1.0, True)
    assert decay_rate(2.0, -0.5) == (2.0, False)


@pytest.mark.parametrize("order", [0, 1])
def test_scheme_is_exact_on_constants(order):
    scheme = QuadratureScheme.create(2.0, order=order, n_nodes=16)
    assert np.sum(scheme.laplace_weights) == pytest.approx(-math.expm1(-2.0 * scheme.t_cut) / 2.0, rel=1e-12)
    assert scheme.constant_error() < 1e-12
    assert np.all(np.diff(scheme.nodes) > 0.0)
    assert scheme.nodes[-1] < scheme.t_cut


def test_weak_contraction_is_flagged():
    scheme = QuadratureScheme.create(1.0, zeta_R=-0.5)
    assert scheme.warnings
    assert scheme.t_cut == pytest.approx(math.log(1e4))


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_scheme_needs_positive_lambda(lam):
    with pytest.raises(ArgumentError):
        QuadratureScheme.create(lam)


def test_scheme_tail_budget():
    with pytest.raises(SchemeError):
        QuadratureScheme.create(1.0, t_cut=0.1, budget=1e-3)


def test_midpoint_nodes():
    nodes, widths = midpoint_nodes(1.0, 4)
    np.testing.assert_allclose(nodes, [0.125, 0.375, 0.625, 0.875])
    assert widths.sum() == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        midpoint_nodes(0.0, 4)


# --- resolvent -----------------------------------------------------------------------------


def test_resolvent_of_a_constant(small_model, zero_G, small_params):
    scheme = QuadratureScheme.create(3.0, zeta_R=-0.5)
    est = resolvent(constant_field(small_model, 2.0), 3.0, X, scheme, small_model, zero_G, small_params)
    assert est.value == pytest.approx(2.0 * np.sum(scheme.laplace_weights))
    assert est.value == pytest.approx(2.0 / 3.0, abs=1e-9)
    assert est.std_error == 0.0
    assert est.op == "resolvent"


def test_oracle_resolvent_matches_closed_form(small_model, zero_G, small_params):
    f = sine_field(small_model)
    scheme = QuadratureScheme.create(3.0, zeta_R=-0.5, n_nodes=64)
    est = resolvent(f, 3.0, X, scheme, small_model, zero_G, small_params, method="oracle")
    assert est.n_outer == 1
    assert est.std_error == 0.0
    assert est.value == pytest.approx(OUSineOracle(small_model).resolvent(3.0, X), abs=5e-3 + scheme.tail_bound)
    assert within_contractivity(est, f, 3.0, scheme)


def test_bel_resolvent_agrees_with_oracle(small_model, zero_G):
    f = sine_field(small_model)
    params = MCParams(n_paths=1000, dt=2e-2, seed=3, block_size=500)
    scheme = QuadratureScheme.create(3.0, zeta_R=-0.5, n_nodes=12)
    bel = resolvent(f, 3.0, X, scheme, small_model, zero_G, params)
    oracle = resolvent(f, 3.0, X, scheme, small_model, zero_G, params, method="oracle")
    assert bel.agrees_with(oracle.value, n_sigma=4.0, atol=5e-3)


def test_scheme_must_match_lambda(small_model, zero_G, small_params):
    scheme = QuadratureScheme.create(3.0)
    with pytest.raises(ConfigurationError):
        resolvent(sine_field(small_model), 2.0, X, scheme, small_model, zero_G, small_params)


def test_direct_bound_needs_lambda_above_four_zeta(default_model):
    f = sine_field(default_model)
    assert direct_derivative_bound(f, 2.0, -0.5) is None
    assert direct_derivative_bound(f, 3.0, -0.5) == pytest.approx(math.sqrt(math.pi))


def test_resolvent_derivative_reports_the_bound(small_model, zero_G, small_params):
    f = sine_field(small_model)
    scheme = QuadratureScheme.create(3.0, order=1, zeta_R=-0.5)
    est = resolvent_d(f, 3.0, X, [small_model.unit_hr(0)], scheme, small_model, zero_G, small_params, method="oracle")
    assert est.op == "resolvent_d1"
    assert est.metadata["direct_bound"] == pytest.approx(math.sqrt(math.pi))
    assert abs(est.value) <= est.metadata["direct_bound"]
    with pytest.raises(ArgumentError):
        resolvent_d(f, 3.0, X, [], scheme, small_model, zero_G, small_params)


def test_closed_form_methods_need_zero_drift(radial_G, zero_G):
    with pytest.raises(ConfigurationError):
        require_method("mehler", radial_G)
    with pytest.raises(ConfigurationError):
        require_method("spectral", zero_G)
    require_method("bel", radial_G)
    require_method("oracle", zero_G)


def test_resolvent_identity_on_a_constant(small_model, zero_G, small_params):
    scheme = QuadratureScheme.create(3.0, zeta_R=-0.5, n_nodes=8)
    report = resolvent_identity_check(constant_field(small_model, 1.5), 3.0, X, 0.2, scheme, small_model, zero_G, small_params.replace(n_paths=50))
    assert report.gap == pytest.approx(0.0, abs=1e-9)
    assert report.ok()
    with pytest.raises(ArgumentError):
        resolvent_identity_check(constant_field(small_model), 3.0, X, 0.0, scheme, small_model, zero_G, small_params)


# --- evolution -----------------------------------------------------------------------------


def test_evolve_without_source_is_the_semigroup(small_model, zero_G, small_params):
    f = sine_field(small_model)
    est = evolve(f, None, 0.4, X, small_model, zero_G, small_params)
    direct = estimate_pt(f, 0.4, X, small_model, zero_G, small_params)
    assert est.op == "evolve"
    assert est.value == direct.value
    assert est.std_error == direct.std_error


def test_evolve_with_a_constant_source(small_model, zero_G, small_params):
    source = constant_field(small_model, 0.5)
    est = evolve(constant_field(small_model, 1.0), lambda s: source, 0.4, X, small_model, zero_G, small_params, n_nodes=8)
    assert est.value == pytest.approx(1.2)
    assert est.std_error == 0.0


def test_evolve_needs_positive_time(small_model, zero_G, small_params):
    with pytest.raises(ArgumentError):
        evolve(sine_field(small_model), None, 0.0, X, small_model, zero_G, small_params)


def test_evolve_probe_needs_an_exponent(small_model, zero_G, small_params):
    with pytest.raises(ContractError):
        evolve_probe(sine_field(small_model), None, 0.5, small_model, zero_G, small_params)


# --- fixed point ---------------------------------------------------------------------------


def test_zero_drift_returns_the_field(small_model, small_params):
    lattice = SchvarLattice(dims=1, points=9)
    f = sine_field(small_model)
    result = schvar_solve(zero_drift(small_model), f, 3.0, small_model, small_params.replace(n_paths=50), lattice, n_nodes=8)
    np.testing.assert_array_equal(result.psi, f.eval(lattice.states(small_model)))
    assert result.converged
    assert result.residual == 0.0
    assert result.trace == [0.0]


def test_small_drift_contracts(small_model, small_params):
    lattice = SchvarLattice(dims=1, points=9)
    result = schvar_solve(constant_drift(small_model, 0.05), sine_field(small_model), 3.0, small_model, small_params.replace(n_paths=200), lattice, n_nodes=8)
    assert result.converged
    assert 0.0 < result.factor < 1.0
    assert result.residual < 1e-8
    assert np.all(np.diff(result.trace) < 0.0)


def test_lattice_validation(small_model, small_params):
    with pytest.raises(ConfigurationError):
        SchvarLattice(dims=0)
    with pytest.raises(ConfigurationError):
        SchvarLattice(points=1)
    with pytest.raises(ConfigurationError):
        SchvarLattice(dims=3).states(small_model)
    with pytest.raises(ArgumentError):
        schvar_solve(zero_drift(small_model), sine_field(small_model), 0.0, small_model, small_params)


# --- stabilization probes ------------------------------------------------------------------


def test_schauder_probe_needs_a_holder_field(small_model, zero_G, small_params):
    with pytest.raises(ContractError):
        schauder_probe(ramp_field(small_model), 3.0, small_model, zero_G, small_params)


def test_schauder_contrast_exponent_shifts_the_slope(small_model, zero_G, small_params):
    f = holder_field(small_model, 0.5)
    report = schauder_probe(f, 3.0, small_model, zero_G, small_params, method="oracle", control_alpha=0.9)
    assert report.kind == "schauder"
    assert report.excluded == []
    assert report.fitted_constant > 0.0
    # both exponents divide the same differences, so the per-scale quotients differ by scale^-0.4
    assert report.contrast.growth_slope() == pytest.approx(report.growth_slope - 0.4, abs=1e-9)


def test_zygmund_probe_needs_a_bounded_field(small_model, zero_G, small_params):
    unbounded = ScalarField(name="linear", eval=lambda x: x[:, 0], declared_class=FieldClass.SMOOTH)
    with pytest.raises(ContractError):
        zygmund_probe(unbounded, 3.0, small_model, zero_G, small_params)


def _noisy_map(mean, n_paths: int = 64, scale: float = 1.0) -> SampledMap:
    rng = np.random.default_rng(11)
    return SampledMap(lambda x: mean(x) + scale * rng.standard_normal(n_paths))


def test_noise_dominated_scales_are_excluded(small_model):
    probe = default_probe(small_model, "holder", 0.5)
    kept, raw, noise, warnings = holder_stabilization(_noisy_map(lambda x: 0.0), 0.5, probe, "noise")
    assert np.all(noise > 0.0)
    assert len(raw.per_scale) == len(probe.scales)
    assert len(kept.per_scale) == 0
    assert sorted(kept.excluded) == sorted(float(s) for s in probe.scales)
    assert warnings and "noise" in warnings[0]


def test_signal_above_the_noise_floor_is_kept(small_model):
    probe = default_probe(small_model, "holder", 0.5)
    kept, raw, noise, warnings = holder_stabilization(_noisy_map(lambda x: 10.0 * x[0], scale=0.01), 0.5, probe, "signal")
    assert np.all(noise > 0.0)
    assert kept.excluded == []
    assert warnings == []
    np.testing.assert_array_equal(kept.per_scale, raw.per_scale)


def test_bel_schauder_quotients_measure_their_noise(small_model, zero_G):
    params = MCParams(n_paths=200, n_inner=4, dt=5e-2, seed=5, block_size=200)
    report = schauder_probe(holder_field(small_model, 0.5), 3.0, small_model, zero_G, params, method="bel", n_nodes=4)
    assert np.all(report.noise > 0.0)
    assert len(report.result.per_scale) + len(report.excluded) == len(report.raw.per_scale)
    assert np.all(report.result.per_scale >= 2.0 * report.noise[~np.isin(report.raw.scales, report.excluded)])


def test_zygmund_quotients_of_a_ramp(small_model, zero_G, small_params):
    report = zygmund_probe(ramp_field(small_model), 3.0, small_model, zero_G, small_params, method="oracle")
    assert report.kind == "zygmund"
    assert report.excluded == []
    assert np.all(report.noise == 0.0)
    assert len(report.result.per_scale) == 4
    assert report.norms["sup_f"] == 1.0
    assert report.fitted_constant == pytest.approx(report.result.estimate)
    assert report.contrast is not None and len(report.contrast.per_scale) == 4
