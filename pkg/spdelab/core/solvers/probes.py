"""Schauder and Zygmund stabilisation probes for derivatives of the resolvent.

A probe evaluates a Monte-Carlo map x -> D_R^i u(x) on the states of a SeminormProbe. All states
share their random numbers, so the noise of a difference is measured from per-path differences.
A scale whose quotients are not clearly above that noise is excluded and flagged.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from spdelab.core.base import AbstractNonlinearity, FieldClass, ScalarField
from spdelab.core.errors import ContractError
from spdelab.core.estimators import MCParams
from spdelab.core.fields.seminorms import SeminormProbe, SeminormResult, holder_seminorm, shifted_states, zygmund_seminorm
from spdelab.core.spectral import SpectralModel, compute_constants

from .quadrature import QuadratureScheme
from .resolvent import resolvent_samples

logger = logging.getLogger(__name__)

NOISE_SIGMAS = 3.0


class SampledMap:
    """x -> per-path samples of shape (N, m), memoised per state; calling it returns the means."""

    def __init__(self, sampler: Callable[[np.ndarray], np.ndarray]):
        self.sampler = sampler
        self._cache: dict[bytes, np.ndarray] = {}

    def samples(self, x: np.ndarray) -> np.ndarray:
        key = np.ascontiguousarray(x, dtype=float).tobytes()
        if key not in self._cache:
            out = np.asarray(self.sampler(np.asarray(x, dtype=float)), dtype=float)
            self._cache[key] = out.reshape(len(out), -1)
        return self._cache[key]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.stack([self.samples(x).mean(axis=0) for x in np.atleast_2d(X)])

    def difference_error(self, *terms: tuple[float, np.ndarray]) -> float:
        """Largest per-component standard error of sum c * samples(x) over (c, x) terms."""
        diff = sum(c * self.samples(x) for c, x in terms)
        if len(diff) < 2:
            return 0.0
        return float(np.max(np.std(diff, axis=0, ddof=1)) / math.sqrt(len(diff)))

    @property
    def evaluations(self) -> int:
        return len(self._cache)


def noise_floor(values: SampledMap, probe: SeminormProbe, kind: str, alpha: Optional[float] = None) -> np.ndarray:
    """Per-scale NOISE_SIGMAS standard errors of the quotient, maximised over points and directions."""
    S, N, D = len(probe.scales), len(probe.probe_points), len(probe.direction_set)
    one = shifted_states(probe, 1.0).reshape(S, N, D, -1)
    two = shifted_states(probe, 2.0).reshape(S, N, D, -1) if kind == "zygmund" else None
    floors = np.zeros(S)
    for a in range(S):
        denom = probe.scales[a] ** alpha if kind == "holder" else probe.scales[a]
        worst = 0.0
        for b, x in enumerate(probe.probe_points):
            for c in range(D):
                if kind == "holder":
                    err = values.difference_error((1.0, one[a, b, c]), (-1.0, x))
                else:
                    err = values.difference_error((1.0, two[a, b, c]), (-2.0, one[a, b, c]), (1.0, x))
                worst = max(worst, err)
        floors[a] = NOISE_SIGMAS * worst / denom
    return floors


@dataclass
class StabilizationReport:
    """Per-scale quotients of a derivative map with noisy scales removed."""

    kind: str
    result: SeminormResult
    raw: SeminormResult
    noise: np.ndarray
    factor: float
    fitted_constant: float
    norms: dict[str, float] = field(default_factory=dict)
    contrast: Optional[SeminormResult] = None
    warnings: list[str] = field(default_factory=list)

    @property
    def excluded(self) -> list[float]:
        return self.result.excluded

    @property
    def stable(self) -> bool:
        return self.result.stable_within(self.factor)

    @property
    def growth_slope(self) -> float:
        return self.result.growth_slope()

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "stable": self.stable,
            "spread": self.result.spread() if len(self.result.per_scale) else math.inf,
            "growth_slope": self.growth_slope,
            "fitted_constant": self.fitted_constant,
            "noise": [float(v) for v in self.noise],
            "result": self.result.as_dict(),
            "contrast": None if self.contrast is None else self.contrast.as_dict(),
            "norms": self.norms,
            "warnings": self.warnings,
        }


def exclude_noisy(raw: SeminormResult, noise: np.ndarray, label: str) -> tuple[SeminormResult, list[str]]:
    """Drop scales where the quotient is below twice its noise floor."""
    drop = (noise > 0.0) & (raw.per_scale < 2.0 * noise)
    warnings = []
    if np.any(drop):
        warnings.append(f"{label}: excluded noise-dominated scales {[float(s) for s in raw.scales[drop]]}")
        logger.warning(warnings[-1], extra={"handler": "exclude_noisy", "op": label})
    return raw.without(drop), warnings


def default_probe(model: SpectralModel, kind: str, alpha: Optional[float] = None) -> SeminormProbe:
    """Origin plus 3 ball points, the r_1 e_1 direction, scales 2^-2..2^-5."""
    return SeminormProbe.create_custom(model, n_points=4, n_directions=1, finest=5, coarsest=2, kind=kind, alpha=alpha)


def _resolvent_map(
    f: ScalarField,
    scheme: QuadratureScheme,
    directions: list[np.ndarray],
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    method: str,
) -> SampledMap:
    return SampledMap(lambda x: resolvent_samples(f, x, scheme, model, G, params, directions, method))


def holder_stabilization(values: SampledMap, alpha: float, probe: SeminormProbe, label: str) -> tuple[SeminormResult, SeminormResult, np.ndarray, list[str]]:
    raw = holder_seminorm(values, alpha, probe)
    noise = noise_floor(values, probe, "holder", alpha)
    kept, warnings = exclude_noisy(raw, noise, label)
    return kept, raw, noise, warnings


def schauder_probe(
    f: ScalarField,
    lam: float,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    probe: Optional[SeminormProbe] = None,
    alpha: Optional[float] = None,
    method: str = "bel",
    n_nodes: int = 24,
    direction: Optional[np.ndarray] = None,
    factor: float = 2.0,
    control_alpha: Optional[float] = None,
) -> StabilizationReport:
    """alpha-Hölder quotients of x -> D^2_R u(x)(h, h) across dyadic scales.

    `alpha` overrides the declared exponent of f. With `control_alpha` the same samples are also
    measured with that exponent; above the true one the quotients grow as the scale shrinks.
    The fitted constant is (sup|u| + sup|D_R u| + sup|D^2_R u| + [D^2_R u]_alpha) / ||f||_alpha on the probe.
    """
    if f.is_constant:
        alpha = 0.5 if alpha is None else alpha
        true_alpha = 1.0
    elif f.declared_class is FieldClass.HOLDER and f.alpha is not None:
        true_alpha = f.alpha
        alpha = f.alpha if alpha is None else alpha
    else:
        raise ContractError(f"schauder_probe needs a certified Hölder field; {f.name} is {f.declared_class.value}")
    probe = probe or default_probe(model, "holder", alpha)
    h = model.unit_hr(0) if direction is None else np.asarray(direction, dtype=float)
    zeta = compute_constants(model, G.M).zeta_R
    sup = f.sup_bound if f.sup_bound is not None else 1.0

    second = _resolvent_map(f, QuadratureScheme.create(lam, 2, true_alpha, zeta, sup, n_nodes), [h, h], model, G, params, method)
    kept, raw, noise, warnings = holder_stabilization(second, alpha, probe, f"schauder[{f.name}]")
    contrast = None
    if control_alpha is not None:
        contrast, _, _, extra = holder_stabilization(second, control_alpha, probe, f"schauder-control[{f.name}]")
        warnings.extend(extra)

    points = probe.probe_points
    first = _resolvent_map(f, QuadratureScheme.create(lam, 1, true_alpha, zeta, sup, n_nodes), [h], model, G, params, method)
    value = _resolvent_map(f, QuadratureScheme.create(lam, 0, 0.0, zeta, sup, n_nodes), [], model, G, params, method)
    norms = {
        "sup_u": float(np.max(np.abs(value(points)))),
        "sup_du": float(np.max(np.abs(first(points)))),
        "sup_d2u": float(np.max(np.abs(second(points)))),
        "seminorm_d2u": kept.estimate,
    }
    norm_f = sup + (f.holder_seminorm or 0.0)
    norms["norm_f"] = norm_f
    fitted = (norms["sup_u"] + norms["sup_du"] + norms["sup_d2u"] + norms["seminorm_d2u"]) / norm_f if norm_f > 0.0 else math.inf
    report = StabilizationReport("schauder", kept, raw, noise, factor, fitted, norms, contrast=contrast, warnings=warnings)
    logger.info(
        f"Schauder probe for {f.name} (alpha={alpha:g}, lambda={lam:g}): stable={report.stable}, C={fitted:.4g}",
        extra={"handler": "schauder_probe", "op": method},
    )
    return report


def zygmund_probe(
    f: ScalarField,
    lam: float,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    probe: Optional[SeminormProbe] = None,
    method: str = "bel",
    n_nodes: int = 24,
    frame_dims: int = 1,
    contrast_alpha: Optional[float] = 0.99,
    factor: float = 2.0,
) -> StabilizationReport:
    """Zygmund quotients of x -> D_R u(x) over the first `frame_dims` H_R frame vectors.

    With `contrast_alpha`, the alpha-Hölder quotients of the same map are reported alongside;
    for a rough f they grow as the scale shrinks while the Zygmund quotients stay flat.
    """
    if f.sup_bound is None:
        raise ContractError(f"zygmund_probe needs a bounded field; {f.name} declares no sup bound")
    probe = probe or default_probe(model, "zygmund")
    zeta = compute_constants(model, G.M).zeta_R
    scheme = QuadratureScheme.create(lam, 1, 0.0, zeta, f.sup_bound, n_nodes)
    frame = [model.unit_hr(i) for i in range(min(frame_dims, model.n))]

    def gradient(x: np.ndarray) -> np.ndarray:
        return np.stack([resolvent_samples(f, x, scheme, model, G, params, [e], method) for e in frame], axis=1)

    values = SampledMap(gradient)
    raw = zygmund_seminorm(values, probe)
    noise = noise_floor(values, probe, "zygmund")
    kept, warnings = exclude_noisy(raw, noise, f"zygmund[{f.name}]")
    contrast = None
    if contrast_alpha is not None:
        contrast, _, _, extra = holder_stabilization(values, contrast_alpha, probe, f"zygmund-contrast[{f.name}]")
        warnings.extend(extra)
    fitted = kept.estimate / f.sup_bound if f.sup_bound > 0.0 else 0.0
    report = StabilizationReport(
        "zygmund",
        kept,
        raw,
        noise,
        factor,
        fitted,
        {"sup_f": f.sup_bound, "seminorm_du": kept.estimate},
        contrast=contrast,
        warnings=warnings,
    )
    logger.info(
        f"Zygmund probe for {f.name} (lambda={lam:g}): stable={report.stable}, C={fitted:.4g}",
        extra={"handler": "zygmund_probe", "op": method},
    )
    return report
