"""Resolvent of the transition semigroup as a Laplace transform, and its H_R-derivatives.

    u = R(lam)f,  u(x) = int_0^inf e^{-lam s} P(s)f(x) ds,  D_R^i u(x) = int_0^inf e^{-lam s} D_R^i P(s)f(x) ds

Each quadrature node gets its own seed, derived from the run seed and the node index, so node
estimates are independent and the variance of the sum is the sum of squared-weight variances.
Samples are combined path by path across nodes, which keeps common random numbers between two
states x and y and lets probes difference the per-path samples directly.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from scipy import special

from spdelab.core.base import AbstractNonlinearity, FieldClass, MCEstimate, ScalarField
from spdelab.core.engine import brownian_increments, integrate, map_blocks
from spdelab.core.errors import ArgumentError, ConfigurationError
from spdelab.core.estimators import MCParams, OUSampler, closed_form_oracle, evaluate_field, make_sampler
from spdelab.core.rng import Stream, derive_seed
from spdelab.core.spectral import SpectralModel, compute_constants

from .quadrature import QuadratureScheme

logger = logging.getLogger(__name__)

METHODS = ("bel", "mehler", "oracle")
_BEL_OPS = {0: "estimate_pt", 1: "bel_d1", 2: "bel_d2"}


def node_params(params: MCParams, j: int, *tag: int) -> MCParams:
    return params.replace(seed=derive_seed(params.seed, int(Stream.NODE), *tag, j))


def require_method(method: str, G: AbstractNonlinearity) -> None:
    if method not in METHODS:
        raise ConfigurationError(f"unknown resolvent method {method!r}; choose from {METHODS}")
    if method != "bel" and not G.is_zero:
        raise ConfigurationError(f"method {method!r} is exact for the Ornstein-Uhlenbeck semigroup only (G = 0)")


def node_samples(
    f: ScalarField,
    s: float,
    x: np.ndarray,
    directions: Sequence[np.ndarray],
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    method: str = "bel",
) -> np.ndarray:
    """Per-path samples of D_R^i P(s)f(x)(directions), i = len(directions).

    Constant fields are exact; the oracle method returns a single noise-free value.
    """
    order = len(directions)
    if order not in _BEL_OPS:
        raise ArgumentError(f"derivative order must be 0, 1 or 2, got {order}")
    if f.is_constant:
        return np.full(params.n_paths, float(f.constant) if order == 0 else 0.0)
    if method == "oracle":
        return np.array([closed_form_oracle(f, model).derivative(order, s, x, *directions)])
    if method == "mehler":
        sampler = OUSampler(model)
        Z = sampler.normals(params.seed, params.n_paths)
        return (sampler.pt_samples, sampler.d1_samples, sampler.d2_samples)[order](f, s, x, *directions, Z)
    return make_sampler(_BEL_OPS[order], f, s, model, G, params, *directions)(x)


def resolvent_samples(
    f: ScalarField,
    x: np.ndarray,
    scheme: QuadratureScheme,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    directions: Sequence[np.ndarray] = (),
    method: str = "bel",
    tag: tuple[int, ...] = (),
) -> np.ndarray:
    """sum_j w_j e^{-lam s_j} (per-path samples at node j), one value per path."""
    require_method(method, G)
    x = np.asarray(x, dtype=float)
    model.check_dim(x)
    total: Any = 0.0
    for j, (s, weight) in enumerate(zip(scheme.nodes, scheme.laplace_weights)):
        total = total + weight * node_samples(f, float(s), x, directions, model, G, node_params(params, j, *tag), method)
    return np.atleast_1d(np.asarray(total, dtype=float))


def summarize(samples: np.ndarray, op: str, params: MCParams, **metadata: Any) -> MCEstimate:
    N = len(samples)
    se = float(np.std(samples, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return MCEstimate(value=float(np.mean(samples)), std_error=se, n_outer=N, n_inner=0, seed=params.seed, t=0.0, op=op, metadata=metadata)


def _check_scheme(lam: float, scheme: QuadratureScheme) -> None:
    if not lam > 0.0:
        raise ArgumentError(f"the resolvent needs lambda > 0, got {lam}")
    if not math.isclose(lam, scheme.lam):
        raise ConfigurationError(f"scheme was built for lambda={scheme.lam}, not {lam}")


def resolvent(
    f: ScalarField,
    lam: float,
    x: np.ndarray,
    scheme: QuadratureScheme,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    method: str = "bel",
) -> MCEstimate:
    """u(x) = R(lam)f(x) by quadrature of e^{-lam s} P(s)f(x); the neglected tail is reported, not added."""
    _check_scheme(lam, scheme)
    samples = resolvent_samples(f, x, scheme, model, G, params, method=method)
    return summarize(samples, "resolvent", params, method=method, lam=lam, **scheme.describe())


def within_contractivity(estimate: MCEstimate, f: ScalarField, lam: float, scheme: QuadratureScheme, n_sigma: float = 3.0) -> bool:
    """|u(x)| <= ||f|| / lam + tail + n_sigma * std_error."""
    if f.sup_bound is None:
        raise ConfigurationError(f"contractivity needs a bounded field; {f.name} declares no sup bound")
    return abs(estimate.value) <= f.sup_bound / lam + scheme.tail_bound + n_sigma * estimate.std_error


def direct_derivative_bound(f: ScalarField, lam: float, zeta_R: float) -> Optional[float]:
    """Gamma((1+alpha)/2) / (lam - 4|zeta_R|)^{(1+alpha)/2} ||f||, defined only for lam > 4|zeta_R|."""
    shifted = lam - 4.0 * abs(zeta_R)
    if shifted <= 0.0:
        return None
    if f.declared_class is FieldClass.HOLDER and f.alpha is not None:
        alpha, norm = f.alpha, f.holder_norm()
    else:
        alpha, norm = 0.0, float(f.sup_bound if f.sup_bound is not None else math.nan)
    return float(special.gamma((1.0 + alpha) / 2.0) / shifted ** ((1.0 + alpha) / 2.0) * norm)


def resolvent_d(
    f: ScalarField,
    lam: float,
    x: np.ndarray,
    directions: Sequence[np.ndarray],
    scheme: QuadratureScheme,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    method: str = "bel",
    report_bound: bool = True,
) -> MCEstimate:
    """D_R^order u(x)(directions) with order = len(directions) in {1, 2}."""
    _check_scheme(lam, scheme)
    order = len(directions)
    if order not in (1, 2):
        raise ArgumentError(f"resolvent_d supports orders 1 and 2, got {order} directions")
    metadata: dict[str, Any] = {"method": method, "order": order, "lam": lam, **scheme.describe()}
    if report_bound and order == 1:
        zeta = compute_constants(model, G.M).zeta_R
        metadata["direct_bound"] = direct_derivative_bound(f, lam, zeta)
        if metadata["direct_bound"] is None:
            logger.warning(
                f"lambda={lam:g} <= 4|zeta_R|={4.0 * abs(zeta):.3g}: the direct derivative estimate does not apply",
                extra={"handler": "resolvent_d", "op": "bound"},
            )
    samples = resolvent_samples(f, x, scheme, model, G, params, directions, method)
    return summarize(samples, f"resolvent_d{order}", params, **metadata)


# --- resolvent identity ------------------------------------------------------------------


@dataclass
class IdentityReport:
    tau: float
    direct: MCEstimate
    head: MCEstimate
    tail: MCEstimate
    tolerance: float

    @property
    def gap(self) -> float:
        return self.direct.value - self.head.value - self.tail.value

    @property
    def sigma(self) -> float:
        return math.sqrt(self.direct.std_error**2 + self.head.std_error**2 + self.tail.std_error**2)

    def ok(self, n_sigma: float = 3.0) -> bool:
        return abs(self.gap) <= n_sigma * self.sigma + self.tolerance

    def as_dict(self) -> dict[str, Any]:
        return {"tau": self.tau, "gap": self.gap, "sigma": self.sigma, "tolerance": self.tolerance, "ok": self.ok()}


def resolvent_identity_check(
    f: ScalarField,
    lam: float,
    x: np.ndarray,
    tau: float,
    scheme: QuadratureScheme,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
) -> IdentityReport:
    """Compare u(x) with int_0^tau e^{-lam s} P(s)f(x) ds + e^{-lam tau} E u(X(tau, x)).

    The last term is a nested estimate with one continuation path per node, which is unbiased for
    E u(X(tau, x)). The three parts use unrelated seeds, so their errors add in quadrature.
    """
    if not tau > 0.0:
        raise ArgumentError(f"tau must be positive, got {tau}")
    _check_scheme(lam, scheme)
    x = np.asarray(x, dtype=float)
    direct = resolvent(f, lam, x, scheme, model, G, params)
    head_scheme = QuadratureScheme.create(lam, t_cut=tau, n_nodes=len(scheme.nodes), sup_bound=0.0)
    head = summarize(resolvent_samples(f, x, head_scheme, model, G, params, tag=(1,)), "resolvent_head", params)

    seed = derive_seed(params.seed, int(Stream.NODE), 2, 0)
    m, step = params.grid(tau)
    decay = math.exp(-lam * tau)

    def run(indices: np.ndarray) -> np.ndarray:
        Y = integrate(x, model, G, step, brownian_increments(seed, indices, m, model.n, step), (), ()).x
        total = np.zeros(len(indices))
        for j, (s, weight) in enumerate(zip(scheme.nodes, scheme.laplace_weights)):
            m_j, step_j = params.grid(float(s))
            dW = brownian_increments(seed, indices, m_j, model.n, step_j, int(Stream.NODE), j)
            total += weight * evaluate_field(f, integrate(Y, model, G, step_j, dW, (), ()).x)
        return decay * total

    samples = np.concatenate(map_blocks(params.n_paths, params.block_size, params.threads, run))
    tail = summarize(samples, "resolvent_tail", params)
    report = IdentityReport(tau=tau, direct=direct, head=head, tail=tail, tolerance=scheme.tail_bound * (1.0 + decay))
    logger.info(
        f"Resolvent identity at tau={tau:g}: gap {report.gap:.3g}, sigma {report.sigma:.3g}",
        extra={"handler": "resolvent_identity_check", "t": tau},
    )
    return report

