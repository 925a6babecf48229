"""Log-log rate fits for derivative decay, controllability and regularisation exponents."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .base import AbstractNonlinearity, FieldClass, MCEstimate, RateFit, ScalarField
from .errors import ConfigurationError, FitError
from .estimators import MCParams, bel_d1, bel_d1_smooth, bel_d2, bel_d2_smooth, bel_d3, closed_form_oracle
from .fields.seminorms import SeminormProbe, ball_points, holder_seminorm, unit_hr_directions
from .spectral import SpectralModel

logger = logging.getLogger(__name__)

MIN_POINTS = 4


def fit_loglog(
    times: Sequence[float],
    values: Sequence[float],
    std_errors: Optional[Sequence[float]] = None,
    max_rel_se: float = 0.2,
    label: str = "rate",
) -> RateFit:
    """Least-squares slope of log value against log time.

    Points with std_error / |value| above `max_rel_se`, or with nonpositive value, are excluded
    and reported. slope_ci is the 95% half-width from the Student t quantile.
    """
    t = np.asarray(times, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    se = None if std_errors is None else np.asarray(std_errors, dtype=float)
    keep = v > 0.0
    if se is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            keep &= se / np.where(v > 0.0, v, 1.0) <= max_rel_se
    excluded = [float(x) for x in t[~keep]]
    if excluded:
        logger.warning(
            f"{label}: excluded {len(excluded)} noisy or degenerate points at t={excluded}",
            extra={"handler": "fit_loglog", "op": label},
        )
    if np.count_nonzero(keep) < MIN_POINTS:
        raise FitError(f"{label}: only {np.count_nonzero(keep)} usable points, need {MIN_POINTS}")
    lx, ly = np.log(t[keep]), np.log(v[keep])
    result = stats.linregress(lx, ly)
    dof = len(lx) - 2
    half_width = float(stats.t.ppf(0.975, dof) * result.stderr) if dof > 0 else math.inf
    residual = float(np.sqrt(np.mean((ly - (result.intercept + result.slope * lx)) ** 2)))
    return RateFit(
        times=t,
        values=v,
        slope=float(result.slope),
        slope_ci=half_width,
        intercept=float(result.intercept),
        residual=residual,
        std_errors=se,
        excluded=excluded,
        metadata={"label": label},
    )


def field_norm(f: ScalarField) -> float:
    """The norm a decay rate is measured against: sup for BUC, the 𝔛 norm, or the Hölder norm."""
    if f.declared_class is FieldClass.XFRAK and f.xfrak_norm is not None:
        return f.xfrak_norm
    if f.declared_class is FieldClass.HOLDER and f.holder_seminorm is not None and f.sup_bound is not None:
        return f.holder_norm()
    if f.sup_bound is None:
        raise ConfigurationError(f"field {f.name} declares no sup bound")
    return f.sup_bound


def expected_decay_slope(f: ScalarField, order: int) -> float:
    """-i/2 for BUC, -(i-1)/2 for 𝔛 and smooth fields, -(i-alpha)/2 for Hölder fields."""
    if f.declared_class is FieldClass.HOLDER:
        return -(order - float(f.alpha)) / 2.0
    if f.declared_class in (FieldClass.XFRAK, FieldClass.SMOOTH):
        return -(order - 1) / 2.0
    return -order / 2.0


@dataclass
class DecayProbes:
    points: np.ndarray
    directions: np.ndarray

    @classmethod
    def create_default(cls, model: SpectralModel, seed: int = 0, n_random: int = 8, n_directions: int = 4, axis_levels: int = 13) -> "DecayProbes":
        """Origin, axis points +-2^-j r_1 e_1 for j < axis_levels, random states in the radius-2 ball."""
        axis = [s * 2.0**-j * model.unit_hr(0) for j in range(axis_levels) for s in (1.0, -1.0)]
        random = ball_points(model, n_random, 2.0, seed, include_origin=False)
        points = np.vstack([np.zeros(model.n), *axis, random])
        return cls(points=points, directions=unit_hr_directions(model, n_directions, seed))

    def describe(self) -> dict:
        return {"n_points": len(self.points), "n_directions": len(self.directions)}


Derivative = Callable[[float, np.ndarray, np.ndarray], tuple[float, float]]


def derivative_method(
    f: ScalarField, order: int, method: str, model: SpectralModel, G: AbstractNonlinearity, params: MCParams
) -> Derivative:
    """(t, x, h) -> (value, std_error) of D^order P(t)f(x)(h, .., h) by the chosen method."""
    if method == "oracle":
        if not G.is_zero:
            raise ConfigurationError("the oracle method needs G = 0")
        oracle = closed_form_oracle(f, model)
        return lambda t, x, h: (oracle.derivative(order, t, x, *([h] * order)), 0.0)

    if method == "smooth":
        estimators: dict[int, Callable[..., MCEstimate]] = {1: bel_d1_smooth, 2: bel_d2_smooth}
    elif method == "bel":
        estimators = {1: bel_d1, 2: bel_d2, 3: bel_d3}
    else:
        raise ConfigurationError(f"unknown derivative method {method!r}")
    if order not in estimators:
        raise ConfigurationError(f"method {method!r} has no order-{order} estimator")
    estimator = estimators[order]

    def evaluate(t: float, x: np.ndarray, h: np.ndarray) -> tuple[float, float]:
        e = estimator(f, t, x, *([h] * order), model, G, params)
        return e.value, e.std_error

    return evaluate


def fit_decay_rate(
    f: ScalarField,
    probes: DecayProbes,
    order: int,
    t_grid: Sequence[float],
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    method: str = "bel",
) -> RateFit:
    """Fit the small-t slope of sup over probes of |D^i P(t)f| / ||f||."""
    if order not in (1, 2, 3):
        raise ConfigurationError(f"decay order must be 1, 2 or 3, got {order}")
    derivative = derivative_method(f, order, method, model, G, params)
    norm = field_norm(f)
    values, errors = [], []
    for t in t_grid:
        best, best_se = 0.0, 0.0
        for x in probes.points:
            for h in probes.directions:
                value, se = derivative(float(t), x, h)
                if abs(value) > best:
                    best, best_se = abs(value), se
        values.append(best / norm)
        errors.append(best_se / norm)
        logger.debug(f"decay t={t:.3g}: sup |D^{order}| = {best:.4g}", extra={"handler": "fit_decay_rate", "t": float(t)})
    fit = fit_loglog(t_grid, values, errors, label=f"decay[{f.name}, i={order}, {method}]")
    fit.metadata.update(
        field=f.name,
        order=order,
        method=method,
        expected=expected_decay_slope(f, order),
        norm=norm,
        probes=probes.describe(),
    )
    return fit


def fit_derivative_holder_rate(
    f: ScalarField,
    alpha: float,
    t_grid: Sequence[float],
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    probe: Optional[SeminormProbe] = None,
    method: str = "oracle",
) -> RateFit:
    """Small-t slope of the alpha-Hölder seminorm of x -> D_R P(t)f(x)h for a bounded f.

    The slope is expected at -(1 + alpha)/2, between the first- and second-derivative decay slopes
    -1/2 and -1 of bounded fields.
    """
    if probe is None:
        axis = DecayProbes.create_default(model, n_random=0, axis_levels=9).points
        probe = SeminormProbe.create_custom(model, n_points=4, n_directions=1, finest=7, coarsest=3, extra_points=axis)
    derivative = derivative_method(f, 1, method, model, G, params)
    h = model.unit_hr(0)
    values = []
    for t in t_grid:
        result = holder_seminorm(lambda X: np.array([derivative(float(t), x, h)[0] for x in X]), alpha, probe)
        values.append(result.estimate)
    fit = fit_loglog(t_grid, values, label=f"holder-of-derivative[{f.name}]")
    fit.metadata.update(expected=-(1.0 + alpha) / 2.0, between=(-1.0, -0.5), inside=-1.0 <= fit.slope <= -0.5, alpha=alpha)
    return fit


def fit_controllability_rate(model: SpectralModel, t_grid: Sequence[float]) -> RateFit:
    """Slope of ||Q_t^{-1/2} e^{tA}|| against t, expected -rho/beta - 1/2 before the truncation saturates."""
    values = [model.controllability_norm(float(t)) for t in t_grid]
    fit = fit_loglog(t_grid, values, label="controllability")
    fit.metadata["expected"] = -model.rho / model.beta - 0.5 if model.beta > 0 else None
    return fit
