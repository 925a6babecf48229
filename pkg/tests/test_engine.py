import math

import numpy as np
import pytest

from spdelab.core.engine import (
    SimConfig,
    check_hreg_bounds,
    coarsen,
    dump_paths,
    lipschitz_probe,
    martingale_check,
    refine_bounds,
    simulate_batch,
    simulate_path,
    strong_order_study,
)
from spdelab.core.errors import ArgumentError, ConfigurationError
from spdelab.core.rng import Stream, derive_seed, path_normals, substream
from spdelab.core.spectral import SpectralModel, apply_exp_A, compute_constants


def test_deterministic_flow_without_noise(zero_G):
    model = SpectralModel(n=1, q_eigs=np.array([1.0]), beta=1.0, rho=0.0, noise_scale=0.0)
    cfg = SimConfig(dt=1e-2, t_end=1.0, n_paths=3, orders=())
    state = simulate_batch(np.array([2.0]), cfg, model, zero_G)
    np.testing.assert_allclose(state.x[:, 0], 2.0 * math.exp(-0.5), rtol=1e-12)


def test_first_variation_is_the_semigroup_for_zero_drift(small_model, zero_G):
    h = small_model.unit_hr(0) + small_model.unit_hr(1)
    cfg = SimConfig(dt=1e-2, t_end=0.5, n_paths=4, orders=(1,), directions=(h,))
    state = simulate_batch(np.zeros(2), cfg, small_model, zero_G)
    expected = apply_exp_A(0.5, h, small_model)
    for p in range(4):
        np.testing.assert_allclose(state.delta1[p, 0], expected, rtol=1e-12)


def test_paths_do_not_depend_on_blocks_or_threads(small_model, zero_G):
    base = SimConfig(dt=1e-2, t_end=0.3, n_paths=100, master_seed=11, orders=())
    serial = simulate_batch(np.ones(2), base.replace(block_size=64), small_model, zero_G)
    threaded = simulate_batch(np.ones(2), base.replace(block_size=16, threads=4), small_model, zero_G)
    assert np.array_equal(serial.x, threaded.x)


def test_substreams_are_keyed():
    a = substream(5, Stream.PATH, 3).standard_normal(4)
    b = substream(5, Stream.PATH, 3).standard_normal(4)
    c = substream(5, Stream.PATH, 4).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert derive_seed(5, 1) != derive_seed(5, 2)


def test_path_normals_select_by_index():
    both = path_normals(1, np.array([0, 1]), 5, 2)
    second = path_normals(1, np.array([1]), 5, 2)
    assert np.array_equal(both[1], second[0])


def test_coarsen_sums_groups():
    fine = np.arange(8.0).reshape(1, 4, 2)
    np.testing.assert_array_equal(coarsen(fine, 2), [[[2.0, 4.0], [10.0, 12.0]]])
    with pytest.raises(ArgumentError):
        coarsen(fine, 3)


def test_first_order_bound_holds_for_zero_drift(small_model, zero_G):
    cfg = SimConfig(dt=1e-3, t_end=1.0, n_paths=1, orders=(1,), directions=(small_model.unit_hr(0),))
    bundle = simulate_path(np.zeros(2), cfg, small_model, zero_G, path_index=0)
    report = check_hreg_bounds(bundle, compute_constants(small_model, 0.0), cfg.tol_dt)
    assert report.ok
    assert report.max_ratio[1] <= 1.0 + 1e-12


def test_bounds_hold_with_bounded_drift(small_model, radial_G):
    dirs = (small_model.unit_hr(0), small_model.unit_hr(1), small_model.unit_hr(0))
    cfg = SimConfig(dt=1e-3, t_end=1.0, n_paths=1, master_seed=3, orders=(1, 2, 3), directions=dirs)
    consts = compute_constants(small_model, radial_G.M)
    for index in range(3):
        bundle = simulate_path(np.array([0.5, -0.5]), cfg, small_model, radial_G, path_index=index)
        assert bundle.orders == (1, 2, 3)
        assert check_hreg_bounds(bundle, consts, cfg.tol_dt).ok


def test_refinement_counts_never_grow_for_zero_drift(small_model, zero_G):
    cfg = SimConfig(dt=1e-2, t_end=0.5, n_paths=8, orders=(1,), directions=(small_model.unit_hr(0),))
    report = refine_bounds(np.zeros(2), cfg, small_model, zero_G, levels=2)
    assert report.counts == [0, 0]
    assert report.monotone


def test_martingale_and_isometry(small_model, zero_G):
    cfg = SimConfig(dt=1e-2, t_end=1.0, n_paths=2000, master_seed=5, orders=(1,), directions=(small_model.unit_hr(0),))
    report = martingale_check(np.zeros(2), cfg, small_model, zero_G)
    assert report.n_paths == 2000
    assert abs(report.mean_weight1) <= 4.0 * report.se_weight1
    assert abs(report.isometry_gap) <= 4.0 * report.se_gap


def test_martingale_check_needs_first_order(small_model, zero_G):
    with pytest.raises(ConfigurationError):
        martingale_check(np.zeros(2), SimConfig(orders=()), small_model, zero_G)


def test_flow_is_a_contraction_for_zero_drift(small_model, zero_G):
    cfg = SimConfig(dt=1e-2, t_end=0.5, n_paths=16, orders=())
    x, y = np.array([1.0, 0.0]), np.array([0.0, 0.5])
    forward = lipschitz_probe(x, y, cfg, small_model, zero_G)
    assert forward == pytest.approx(1.0)
    assert lipschitz_probe(y, x, cfg, small_model, zero_G) == pytest.approx(forward)


def test_lipschitz_probe_needs_distinct_points(small_model, zero_G):
    with pytest.raises(ArgumentError):
        lipschitz_probe(np.ones(2), np.ones(2), SimConfig(orders=()), small_model, zero_G)


def test_strong_order_error_shrinks(small_model, radial_G):
    cfg = SimConfig(dt=0.05, t_end=0.5, n_paths=64, orders=())
    report = strong_order_study(np.array([1.0, 1.0]), cfg, small_model, radial_G)
    assert report.errors[1] < report.errors[0]
    assert report.reference_dt == pytest.approx(0.05 / 16)


def test_strong_order_reduction_is_first_order(small_model, zero_G):
    cfg = SimConfig(dt=0.05, t_end=1.0, n_paths=2000, orders=())
    report = strong_order_study(np.array([0.5, -0.5]), cfg, small_model, zero_G)
    # against a dt/16 reference the first-order ratio tends to about 2.10
    assert 1.7 <= report.reduction <= 2.3


def test_strong_order_reference_factor(small_model, zero_G):
    with pytest.raises(ArgumentError):
        strong_order_study(np.zeros(2), SimConfig(orders=()), small_model, zero_G, reference_factor=6)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dt": 2.0, "t_end": 1.0},
        {"orders": (4,)},
        {"orders": (2,), "directions": (np.ones(2),)},
        {"orders": (1,), "directions": (np.zeros(2),)},
        {"n_paths": 0},
    ],
)
def test_sim_config_rejects(kwargs):
    with pytest.raises(ConfigurationError):
        SimConfig(**kwargs)


def test_dump_paths_layout(tmp_path, small_model, zero_G):
    cfg = SimConfig(dt=0.25, t_end=0.5, n_paths=2, orders=(1,), directions=(small_model.unit_hr(0),))
    bundles = [simulate_path(np.zeros(2), cfg, small_model, zero_G, i) for i in range(2)]
    path = dump_paths(bundles, tmp_path / "paths.csv")
    lines = path.read_bytes().split(b"\n")
    assert lines[0] == b"path,t,x_1,x_2,weight1"
    assert len([line for line in lines if line]) == 1 + 2 * 3
