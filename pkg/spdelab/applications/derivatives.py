"""Semigroup-derivative experiments: BEL estimators against closed forms, and small-time decay rates."""

import logging

import numpy as np

from spdelab.core.base import AbstractExperiment
from spdelab.core.errors import ConfigurationError, FitError
from spdelab.core.estimators import bel_d1, bel_d1_smooth, bel_d2, bel_d2_smooth, bel_d3, closed_form_oracle
from spdelab.core.rates import DecayProbes, expected_decay_slope, fit_decay_rate, fit_derivative_holder_rate

from .context import RunContext

logger = logging.getLogger(__name__)

_ORDERS = {"d1": 1, "d1_smooth": 1, "d2": 2, "d2_smooth": 2, "d3": 3}


class BelOracleExperiment(AbstractExperiment):
    """Every BEL estimator at t in `times`, each checked against the Ornstein-Uhlenbeck closed form."""

    kind = "bel-oracle"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        ctx.require_zero_nonlinearity(self.kind)
        f = ctx.field(block.field)
        oracle = closed_form_oracle(f, ctx.model)
        h = ctx.model.unit_hr(0)
        x = ctx.x0
        d3_params = ctx.params.replace(n_paths=block.n_paths_d3 or ctx.params.n_paths)
        for t in block.times:
            for op in block.ops:
                directions = [h] * _ORDERS[op]
                if op == "d1":
                    est = bel_d1(f, t, x, h, ctx.model, ctx.G, ctx.params)
                elif op == "d1_smooth":
                    est = bel_d1_smooth(f, t, x, h, ctx.model, ctx.G, ctx.params)
                elif op == "d2":
                    est = bel_d2(f, t, x, h, h, ctx.model, ctx.G, ctx.params)
                elif op == "d2_smooth":
                    est = bel_d2_smooth(f, t, x, h, h, ctx.model, ctx.G, ctx.params)
                else:
                    est = bel_d3(f, t, x, h, h, h, ctx.model, ctx.G, d3_params)
                target = oracle.derivative(_ORDERS[op], t, x, *directions)
                self.estimate(f"{op}[t={t:g}]", est, target=target, tolerance=block.n_sigma * est.std_error, comparison="abs")
                logger.info(
                    f"{op} at t={t:g}: {est.value:.5g} ± {est.std_error:.2g} (closed form {target:.5g}, z={est.z_score(target):.2f})",
                    extra={"handler": self.kind, "op": op, "t": t},
                )


class DecayExperiment(AbstractExperiment):
    """Log-log slope of sup |D^i P(t)f| / ||f|| over t in [t_min, t_max] against the class exponent."""

    kind = "decay"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        probes = DecayProbes.create_default(ctx.model, ctx.params.seed, block.n_random, block.n_directions)
        t_grid = np.geomspace(block.t_min, block.t_max, block.n_times)
        fit = fit_decay_rate(f, probes, block.order, t_grid, ctx.model, ctx.G, ctx.params, block.method)
        expected = expected_decay_slope(f, block.order)
        self.metric(
            f"decay_slope[i={block.order}]",
            fit.slope,
            std_error=fit.slope_ci,
            target=expected,
            tolerance=block.tolerance,
            comparison="abs",
        )
        self.metric("fit_residual", fit.residual)
        self.series(f"decay-i{block.order}", fit.times, fit.values)
        self.detail("decay_fit", fit.as_dict())

        if block.oracle_check and block.method != "oracle" and ctx.G.is_zero:
            try:
                reference = fit_decay_rate(f, probes, block.order, t_grid, ctx.model, ctx.G, ctx.params, "oracle")
            except (ConfigurationError, FitError) as e:
                logger.warning(f"oracle decay check skipped: {e}", extra={"handler": self.kind})
            else:
                self.metric(f"oracle_decay_slope[i={block.order}]", reference.slope, target=expected, tolerance=block.tolerance, comparison="abs")
                self.metric("slope_gap_to_oracle", fit.slope - reference.slope)
                self.series(f"decay-i{block.order}-oracle", reference.times, reference.values)

        if block.holder_alpha is not None:
            try:
                holder = fit_derivative_holder_rate(f, block.holder_alpha, t_grid, ctx.model, ctx.G, ctx.params, method=block.method)
            except FitError as e:
                logger.warning(f"Hölder-of-derivative fit skipped: {e}", extra={"handler": self.kind})
                return
            self.metric("holder_of_derivative_slope", holder.slope, std_error=holder.slope_ci, target=holder.metadata["expected"])
            self.metric("holder_of_derivative_between", float(holder.metadata["inside"]))
            self.series("holder-of-derivative", holder.times, holder.values)
            self.detail("holder_of_derivative_fit", holder.as_dict())
