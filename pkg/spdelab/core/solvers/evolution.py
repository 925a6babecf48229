"""Mild solution of the inhomogeneous backward problem, v(t,x) = P(t)f(x) + int_0^t P(t-s)g(s)(x) ds."""

import dataclasses
import logging
import math
from typing import Optional, Sequence

import numpy as np

from spdelab.core.base import AbstractNonlinearity, FieldClass, MCEstimate, ScalarField, TimeFieldProtocol
from spdelab.core.errors import ArgumentError, ContractError
from spdelab.core.estimators import MCParams, estimate_pt
from spdelab.core.fields.seminorms import SeminormProbe
from spdelab.core.spectral import SpectralModel

from .probes import SampledMap, StabilizationReport, default_probe, holder_stabilization
from .quadrature import midpoint_nodes
from .resolvent import node_params, node_samples, require_method

logger = logging.getLogger(__name__)


def _is_zero(g: Optional[TimeFieldProtocol], nodes: np.ndarray) -> bool:
    if g is None:
        return True
    fields = [g(float(s)) for s in nodes]
    return all(h.is_constant and h.constant == 0.0 for h in fields)


def evolve_samples(
    f: ScalarField,
    g: Optional[TimeFieldProtocol],
    t: float,
    x: np.ndarray,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    directions: Sequence[np.ndarray] = (),
    n_nodes: int = 16,
    method: str = "bel",
) -> np.ndarray:
    """Per-path samples of D_R^i v(t,x)(directions); node j of the time integral has its own seed."""
    require_method(method, G)
    x = np.asarray(x, dtype=float)
    nodes, widths = midpoint_nodes(t, n_nodes)
    total = node_samples(f, t, x, directions, model, G, params, method)
    if _is_zero(g, nodes):
        return total
    for j, (s, width) in enumerate(zip(nodes, widths)):
        total = total + width * node_samples(g(float(s)), t - float(s), x, directions, model, G, node_params(params, j), method)
    return total


def evolve(
    f: ScalarField,
    g: Optional[TimeFieldProtocol],
    t: float,
    x: np.ndarray,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    n_nodes: int = 16,
) -> MCEstimate:
    """v(t,x); with g absent or identically zero this is estimate_pt(f, t, x) itself."""
    if not t > 0.0:
        raise ArgumentError(f"evolve needs t > 0, got {t}")
    nodes, widths = midpoint_nodes(t, n_nodes)
    if _is_zero(g, nodes):
        return dataclasses.replace(estimate_pt(f, t, x, model, G, params), op="evolve")

    head = estimate_pt(f, t, x, model, G, params)
    value, variance = head.value, head.std_error**2
    for j, (s, width) in enumerate(zip(nodes, widths)):
        part = estimate_pt(g(float(s)), t - float(s), x, model, G, node_params(params, j))
        value += width * part.value
        variance += (width * part.std_error) ** 2
        logger.debug(f"evolve node {j}: s={s:.3g}, P(t-s)g = {part.value:.4g}", extra={"handler": "evolve", "t": float(s)})
    return MCEstimate(
        value=value,
        std_error=math.sqrt(variance),
        n_outer=params.n_paths,
        n_inner=0,
        seed=params.seed,
        t=t,
        op="evolve",
        metadata={"n_nodes": n_nodes},
    )


def evolve_probe(
    f: ScalarField,
    g: Optional[TimeFieldProtocol],
    t: float,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    probe: Optional[SeminormProbe] = None,
    alpha: Optional[float] = None,
    n_nodes: int = 16,
    method: str = "bel",
    factor: float = 2.0,
) -> StabilizationReport:
    """alpha-Hölder quotients of x -> D^2_R v(t,x)(h, h), assembled as in the Schauder probe."""
    if alpha is None:
        if f.declared_class is not FieldClass.HOLDER or f.alpha is None:
            raise ContractError(f"evolve_probe needs alpha or a certified Hölder field; {f.name} is {f.declared_class.value}")
        alpha = f.alpha
    probe = probe or default_probe(model, "holder", alpha)
    h = model.unit_hr(0)
    values = SampledMap(lambda x: evolve_samples(f, g, t, x, model, G, params, (h, h), n_nodes, method))
    kept, raw, noise, warnings = holder_stabilization(values, alpha, probe, f"evolve[{f.name}, t={t:g}]")
    points = probe.probe_points
    norms = {"sup_d2v": float(np.max(np.abs(values(points)))), "seminorm_d2v": kept.estimate}
    report = StabilizationReport("evolve", kept, raw, noise, factor, kept.estimate, norms, warnings=warnings)
    logger.info(f"Evolution probe at t={t:g}: stable={report.stable}", extra={"handler": "evolve_probe", "t": t})
    return report
