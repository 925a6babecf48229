"""Lasry-Lions regularisation and K-functional experiments."""

import logging

import numpy as np

from spdelab.core.base import AbstractExperiment
from spdelab.core.regularizer import (
    EnvelopeConfig,
    brute_force_envelope_1d,
    interpolation_norm_probe,
    ll_regularize,
    verify_ll_bounds,
)

from .context import RunContext

logger = logging.getLogger(__name__)


def _envelope_config(block, threads: int) -> EnvelopeConfig:
    return EnvelopeConfig(
        epsilon=getattr(block, "eps_min", 1.0),
        search_radius_inner=getattr(block, "search_radius_inner", None),
        search_radius_outer=getattr(block, "search_radius_outer", None),
        optimizer="grid" if block.subspace_dims <= 2 else "descent",
        grid_resolution=block.grid_resolution,
        subspace_dims=block.subspace_dims,
        threads=threads,
    )


class EnvelopeExperiment(AbstractExperiment):
    """Order, sup-norm and rate checks of f_eps, plus a 1-d brute-force comparison at x0."""

    kind = "envelope"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        base_cfg = _envelope_config(block, ctx.threads)
        eps_grid = np.geomspace(block.eps_min, block.eps_max, block.n_eps)

        if block.epsilon is not None:
            single = ll_regularize(f, ctx.x0, base_cfg.replace(epsilon=block.epsilon), ctx.model)
            self.metric(f"f_eps[eps={block.epsilon:g}]", single.value)
            self.detail("envelope", {"h_star": single.h_star, "k_star": single.k_star, "radii": single.radii, "boundary_hit": single.boundary_hit})

        u = ctx.model.unit_hr(0)
        x0 = ctx.x0

        def profile(s: np.ndarray) -> np.ndarray:
            return f.eval(x0[None, :] + s[:, None] * u[None, :])

        for eps in eps_grid:
            cfg = base_cfg.replace(epsilon=float(eps), subspace_dims=1, optimizer="grid")
            solved = ll_regularize(f, x0, cfg, ctx.model)
            brute = brute_force_envelope_1d(profile, float(eps), solved.radii, block.brute_force_step)
            self.metric(
                f"brute_force_gap[eps={eps:.3g}]",
                abs(solved.value - brute),
                target=0.0,
                tolerance=block.brute_force_tolerance,
                comparison="max",
            )

        report = verify_ll_bounds(f, eps_grid, ctx.model, base_cfg)
        self.metric("nonnegative_gap", float(report.nonnegative), target=1.0, comparison="min")
        self.metric("sup_norm_bounded", float(report.bounded), target=1.0, comparison="min")
        for label, fit in (("error", report.error_fit), ("gradient", report.gradient_fit)):
            if fit is None:
                continue
            expected = fit.metadata.get("expected")
            self.metric(
                f"{label}_exponent",
                fit.slope,
                std_error=fit.slope_ci,
                target=expected,
                tolerance=block.tolerance if expected is not None else None,
                comparison="abs" if expected is not None else "info",
            )
            self.series(f"ll-{label}", fit.times, fit.values)
        if report.c_alpha is not None:
            self.metric("c_alpha", report.c_alpha)
        if report.lipschitz_spread is not None:
            self.metric("gradient_lipschitz_spread", report.lipschitz_spread)
        self.detail("ll_report", report.as_dict())


class InterpolationExperiment(AbstractExperiment):
    """r^{-alpha} K(r, f) over a dyadic r-grid; a certified alpha-Hölder field keeps it within a factor."""

    kind = "interp"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        r_grid = 2.0 ** np.arange(block.r_min_exp, block.r_max_exp + 1, dtype=float)
        probe = interpolation_norm_probe(f, block.alpha, r_grid, ctx.model, _envelope_config(block, ctx.threads))
        self.metric("weighted_norm", probe.norm)
        self.metric("weighted_spread", probe.spread, target=block.spread_factor, tolerance=0.0, comparison="max")
        # the constructive split may lose to a trivial one by at most the slack
        self.metric("excess_over_trivial_splits", probe.excess_over_trivial, target=0.0, tolerance=block.trivial_slack, comparison="max")
        self.metric("decomposition_wins", float(sum(b.decomposition < b.trivial for b in probe.bounds)))
        self.series("k-weighted", r_grid, probe.weighted)
        self.detail(
            "k_bounds",
            [{"r": b.r, "bound": b.bound, "decomposition": b.decomposition, "trivial_sup": b.trivial_sup, "trivial_xfrak": b.trivial_xfrak, **b.parts} for b in probe.bounds],
        )
