"""Experiments on the stationary, evolution and fixed-point equations built on the resolvent."""

import logging
from typing import Optional

import numpy as np

from spdelab.core.base import AbstractExperiment, ScalarField, TimeFieldProtocol
from spdelab.core.errors import ConfigurationError
from spdelab.core.estimators import closed_form_oracle
from spdelab.core.fields.catalog import constant_field
from spdelab.core.fields.seminorms import SeminormProbe
from spdelab.core.solvers.evolution import evolve, evolve_probe
from spdelab.core.solvers.probes import StabilizationReport, schauder_probe, zygmund_probe
from spdelab.core.solvers.quadrature import QuadratureScheme
from spdelab.core.solvers.resolvent import resolvent, resolvent_d, resolvent_identity_check, within_contractivity
from spdelab.core.solvers.schvar import SchvarLattice, constant_drift, schvar_solve, zero_drift

from .context import RunContext

logger = logging.getLogger(__name__)


def _probe(ctx: RunContext, kind: str, alpha: Optional[float], finest: int = 5, coarsest: int = 2) -> SeminormProbe:
    block = ctx.block
    extra = ctx.points(getattr(block, "probe_points", None))
    return SeminormProbe.create_custom(
        ctx.model,
        n_points=4,
        n_directions=1,
        finest=finest,
        coarsest=coarsest,
        kind=kind,
        alpha=alpha,
        seed=ctx.params.seed,
        extra_points=np.array(extra) if extra else None,
    )


def _oracle(f: ScalarField, ctx: RunContext):
    if not ctx.G.is_zero:
        return None
    try:
        return closed_form_oracle(f, ctx.model)
    except ConfigurationError:
        return None


class ResolventExperiment(AbstractExperiment):
    """u = R(lam)f at x0: contractivity, the tau-split identity and, under G = 0, the closed form."""

    kind = "resolvent"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        if f.sup_bound is None:
            raise ConfigurationError(f"the resolvent experiment needs a bounded field; {f.name} declares no sup bound")
        scheme = QuadratureScheme.create(block.lam, 0, 0.0, ctx.zeta_R, f.sup_bound, block.n_nodes)
        for w in scheme.warnings:
            logger.warning(w, extra={"handler": self.kind})
        self.detail("scheme", scheme.describe())

        u = resolvent(f, block.lam, ctx.x0, scheme, ctx.model, ctx.G, ctx.params)
        self.estimate("u", u)
        self.metric(
            "contractivity",
            abs(u.value),
            target=f.sup_bound / block.lam + scheme.tail_bound,
            tolerance=block.n_sigma * u.std_error,
            comparison="max",
        )
        if not within_contractivity(u, f, block.lam, scheme, block.n_sigma):
            logger.warning(f"|u(x0)| = {abs(u.value):.4g} exceeds ||f||/lambda", extra={"handler": self.kind})

        oracle = _oracle(f, ctx)
        if oracle is not None:
            quadrature = float(sum(w * oracle.derivative(0, float(s), ctx.x0) for s, w in zip(scheme.nodes, scheme.laplace_weights)))
            self.metric("u_vs_closed_form", u.value, std_error=u.std_error, target=quadrature, tolerance=block.n_sigma * u.std_error, comparison="abs")
            self.metric("quadrature_error", quadrature - oracle.resolvent(block.lam, ctx.x0))

        h = ctx.model.unit_hr(0)
        du = resolvent_d(f, block.lam, ctx.x0, [h], QuadratureScheme.create(block.lam, 1, 0.0, ctx.zeta_R, f.sup_bound, block.n_nodes), ctx.model, ctx.G, ctx.params)
        self.estimate("du", du)
        bound = du.metadata.get("direct_bound")
        if bound is not None:
            self.metric("du_direct_bound", abs(du.value), target=bound, tolerance=block.n_sigma * du.std_error, comparison="max")

        for tau in block.taus:
            report = resolvent_identity_check(f, block.lam, ctx.x0, tau, scheme, ctx.model, ctx.G, ctx.params)
            self.metric(
                f"identity_gap[tau={tau:g}]",
                report.gap,
                std_error=report.sigma,
                target=0.0,
                tolerance=block.n_sigma * report.sigma + report.tolerance,
                comparison="abs",
            )

        for i, x in enumerate(ctx.points(block.points)):
            self.estimate(f"u[point={i}]", resolvent(f, block.lam, x, scheme, ctx.model, ctx.G, ctx.params))


def _report_stabilization(experiment: AbstractExperiment, prefix: str, report: StabilizationReport, check: bool) -> None:
    experiment.metric(
        f"{prefix}_spread",
        report.result.spread() if len(report.result.per_scale) else np.inf,
        target=report.factor if check else None,
        tolerance=0.0 if check else None,
        comparison="max" if check else "info",
    )
    experiment.metric(f"{prefix}_growth_slope", report.growth_slope)
    experiment.metric(f"{prefix}_fitted_constant", report.fitted_constant)
    experiment.metric(f"{prefix}_excluded_scales", float(len(report.excluded)))
    experiment.series(prefix, report.result.scales, report.result.per_scale)
    experiment.detail(prefix, report.as_dict())


class SchauderExperiment(AbstractExperiment):
    """alpha-Hölder quotients of D^2_R u stay flat; a larger misdeclared alpha makes them grow."""

    kind = "schauder"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        alpha = block.alpha if block.alpha is not None else f.alpha
        report = schauder_probe(
            f,
            block.lam,
            ctx.model,
            ctx.G,
            ctx.params,
            probe=_probe(ctx, "holder", alpha, block.finest, block.coarsest),
            alpha=alpha,
            method=block.method,
            n_nodes=block.n_nodes,
            factor=block.factor,
            control_alpha=block.control_alpha,
        )
        _report_stabilization(self, "schauder", report, check=True)
        for key, value in report.norms.items():
            self.metric(f"norm.{key}", value)

        control = report.contrast
        if control is not None and alpha is not None:
            # quotients measured with too large an exponent grow like scale^(alpha - control_alpha)
            self.metric(
                "control_growth_slope",
                control.growth_slope(),
                target=0.5 * (alpha - block.control_alpha),
                tolerance=0.0,
                comparison="max",
            )
            self.metric("control_spread", control.spread() if len(control.per_scale) else 0.0)
            self.series("schauder-control", control.scales, control.per_scale)


class ZygmundExperiment(AbstractExperiment):
    """Zygmund quotients of D_R u for a merely bounded f stay flat across dyadic scales."""

    kind = "zygmund"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        report = zygmund_probe(
            f,
            block.lam,
            ctx.model,
            ctx.G,
            ctx.params,
            probe=_probe(ctx, "zygmund", None, block.finest, block.coarsest),
            method=block.method,
            n_nodes=block.n_nodes,
            contrast_alpha=block.contrast_alpha,
            factor=block.factor,
        )
        _report_stabilization(self, "zygmund", report, check=True)
        if report.contrast is not None:
            self.metric("contrast_spread", report.contrast.spread() if len(report.contrast.per_scale) else np.inf)
            self.metric("contrast_growth_slope", report.contrast.growth_slope())
            self.series("zygmund-contrast", report.contrast.scales, report.contrast.per_scale)


def constant_source(field: ScalarField) -> TimeFieldProtocol:
    """The time-independent source s -> field."""

    def source(s: float) -> ScalarField:
        return field

    return source


class EvolveExperiment(AbstractExperiment):
    """v(t, x0) for the backward problem with a constant source, and optionally its Schauder probe."""

    kind = "evolve"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        f = ctx.field(block.field)
        g = None if block.source is None else constant_source(constant_field(ctx.model, block.source))
        v = evolve(f, g, block.t, ctx.x0, ctx.model, ctx.G, ctx.params, block.n_nodes)
        oracle = _oracle(f, ctx)
        if oracle is not None:
            target = oracle.derivative(0, block.t, ctx.x0) + (block.source or 0.0) * block.t
            self.estimate("v", v, target=target, tolerance=block.n_sigma * v.std_error, comparison="abs")
        else:
            self.estimate("v", v)
        for i, x in enumerate(ctx.points(block.points)):
            self.estimate(f"v[point={i}]", evolve(f, g, block.t, x, ctx.model, ctx.G, ctx.params, block.n_nodes))

        if block.probe:
            probe_field = ctx.field(block.probe_field)
            alpha = block.alpha if block.alpha is not None else probe_field.alpha
            report = evolve_probe(
                probe_field,
                g,
                block.t,
                ctx.model,
                ctx.G,
                ctx.params,
                probe=_probe(ctx, "holder", alpha),
                alpha=alpha,
                n_nodes=block.n_nodes,
                method=block.method,
                factor=block.factor,
            )
            _report_stabilization(self, "evolve", report, check=False)


class SchvarExperiment(AbstractExperiment):
    """Picard iteration for psi = f + <F, grad_R R(lam)psi>_R, with F = delta r_1 e_1 and with F = 0."""

    kind = "schvar"

    def __init__(self, context: RunContext, **kwargs):
        super().__init__(**kwargs)
        self.context = context

    def run(self) -> None:
        ctx, block = self.context, self.context.block
        ctx.require_zero_nonlinearity(self.kind)
        f = ctx.field(block.field)
        lattice = SchvarLattice(block.dims, block.points, block.extent)

        result = schvar_solve(constant_drift(ctx.model, block.delta), f, block.lam, ctx.model, ctx.params, lattice, block.max_iters, block.tol, block.n_nodes)
        self.metric("converged", float(result.converged), target=1.0, comparison="min")
        self.metric("geometric", float(result.geometric(block.ratio_tolerance)), target=1.0, comparison="min")
        self.metric("contraction_factor", result.factor)
        self.metric("residual", result.residual, target=0.0, tolerance=3.0 * result.sigma, comparison="max")
        self.metric("propagated_sigma", result.sigma)
        self.series("picard-differences", np.arange(1, len(result.trace) + 1), result.trace)
        self.detail("schvar", result.as_dict())

        free = schvar_solve(zero_drift(ctx.model), f, block.lam, ctx.model, ctx.params, lattice, block.max_iters, block.tol, block.n_nodes)
        exact = np.asarray(f.eval(lattice.states(ctx.model)), dtype=float)
        self.metric("zero_drift_error", float(np.max(np.abs(free.psi - exact))), target=0.0, tolerance=0.0, comparison="max")
