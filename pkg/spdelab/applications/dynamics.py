"""Pathwise experiments on the discretized equation: variational bounds and martingale diagnostics."""

import logging

import numpy as np

from spdelab.core.base import AbstractExperiment
from spdelab.core.engine import SimConfig, dump_paths, martingale_check, refine_bounds, simulate_path, strong_order_study
from spdelab.core.nonlinearity import verify_nonlinearity
from spdelab.core.rates import fit_controllability_rate

from .context import RunContext

logger = logging.getLogger(__name__)


class BoundsExperiment(AbstractExperiment):
    """Pathwise H_R bounds on the variational processes, refined dt -> dt/2 -> dt/4 on the same paths."""

    kind = "bounds"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def sim_config(self) -> SimConfig:
        ctx, block = self.context, self.context.block
        orders = tuple(block.orders)
        directions = tuple(ctx.model.unit_hr(i % ctx.model.n) for i in range(max(orders)))
        return SimConfig(
            dt=block.dt,
            t_end=block.t_end,
            n_paths=ctx.params.n_paths,
            master_seed=ctx.params.seed,
            orders=orders,
            directions=directions,
            tol_dt=block.tol_dt,
            block_size=ctx.params.block_size,
            threads=ctx.threads,
        )

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        cfg = self.sim_config()
        logger.info(
            f"Bounds sweep: {cfg.n_paths} paths, t_end={cfg.t_end:g}, dt={cfg.dt:g}, G={ctx.G.name} (M={ctx.G.M:.4g})",
            extra={"handler": self.kind, "n_paths": cfg.n_paths},
        )
        if block.nonlinearity_check:
            check = verify_nonlinearity(ctx.G, ctx.model.n, seed=ctx.params.seed)
            for key, value in check.items():
                self.metric(f"nonlinearity.{key}", value)
            self.metric("nonlinearity.sampled_within_M", float(check["sampled_bound"] <= ctx.G.M * (1.0 + 1e-9)), target=1.0, comparison="min")

        refinement = refine_bounds(ctx.x0, cfg, ctx.model, ctx.G, levels=block.levels)
        first = refinement.reports[0]
        self.metric("violations", first.total, target=0.0, tolerance=0.0, comparison="max")
        for order in sorted(first.max_ratio):
            self.metric(f"max_ratio.order{order}", first.max_ratio[order])
        for level, count in enumerate(refinement.counts[1:], start=1):
            self.metric(f"violations.dt/{2**level}", count)
        self.metric("violations_monotone", float(refinement.monotone), target=1.0, comparison="min")
        self.detail("refinement", {"counts": refinement.counts, "dts": [r.dt for r in refinement.reports]})
        self.detail("violations", [vars(v) for v in first.violations])

        if block.strong_order:
            study = strong_order_study(ctx.x0, cfg.replace(orders=(), directions=()), ctx.model, ctx.G)
            # first-order scheme: halving dt halves the error
            self.metric("strong_error.reduction", study.reduction, target=2.0, tolerance=0.3, comparison="abs")
            self.series("strong-error", study.dts, study.errors)

        if ctx.dump_paths and ctx.out_dir is not None:
            bundles = [simulate_path(ctx.x0, cfg, ctx.model, ctx.G, i) for i in range(min(ctx.dump_paths, cfg.n_paths))]
            path = dump_paths(bundles, ctx.out_dir / "paths.csv")
            self.detail("paths_csv", str(path))


class MartingaleExperiment(AbstractExperiment):
    """Mean of the first BEL weight and the Itô-isometry gap, each against three standard errors."""

    kind = "martingale"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        cfg = SimConfig(
            dt=block.dt,
            t_end=block.t_end,
            n_paths=ctx.params.n_paths,
            master_seed=ctx.params.seed,
            orders=(1,),
            directions=(ctx.model.unit_hr(0),),
            block_size=ctx.params.block_size,
            threads=ctx.threads,
        )
        report = martingale_check(ctx.x0, cfg, ctx.model, ctx.G)
        self.metric(
            "mean_weight1",
            report.mean_weight1,
            std_error=report.se_weight1,
            target=0.0,
            tolerance=block.n_sigma * report.se_weight1,
            comparison="abs",
        )
        self.metric(
            "isometry_gap",
            report.isometry_gap,
            std_error=report.se_gap,
            target=0.0,
            tolerance=block.n_sigma * report.se_gap,
            comparison="abs",
        )

        t_grid = np.geomspace(1e-3, 1e-1, 9)
        fit = fit_controllability_rate(ctx.model, t_grid)
        self.metric("controllability.slope", fit.slope, std_error=fit.slope_ci, target=fit.metadata["expected"])
        self.series("controllability", fit.times, fit.values)
        self.detail("controllability", fit.as_dict())
