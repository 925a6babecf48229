"""Monte-Carlo estimators of P(t)f and of its H_R-derivatives.

The derivative estimators are Bismut-Elworthy-Li formulas: they average f (never its derivatives,
except in the `_smooth` variants) against the stochastic weights carried by the engine. Second
and third derivatives split the horizon at t/2 and estimate the semigroup and its derivatives at
X(t/2, x) with inner batches. Every inner batch draws from its own substream keyed by the outer
path index, so inner noise is independent of the outer path and the nested estimator is
conditionally unbiased.

All estimators are deterministic functions of (f, t, x, directions, model, G, params).
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate as sp_integrate

from .base import AbstractNonlinearity, FieldClass, MCEstimate, ScalarField
from .engine import BatchState, brownian_increments, integrate, map_blocks, steps_for
from .errors import ArgumentError, ConfigurationError, ContractError, EstimatorError, SchemeError
from .rng import Stream, block_normals, substream
from .spectral import SpectralModel, compute_constants, hr_inner, hr_norm

logger = logging.getLogger(__name__)

Sampler = Callable[[np.ndarray], np.ndarray]


@dataclass
class MCParams:
    """Sample sizes, time resolution and seed shared by every estimator."""

    n_paths: int = 10_000
    n_inner: int = 32
    n_inner_d3: int = 16
    dt: float = 1e-2
    min_steps: int = 16
    seed: int = 0
    block_size: int = 256
    threads: int = 1
    t_min_d3: float = 0.02
    fast_d3: bool = False

    def __post_init__(self):
        if self.n_paths < 2:
            raise ConfigurationError(f"an estimate needs at least two outer paths, got {self.n_paths}")
        if self.n_inner < 2 or self.n_inner_d3 < 2:
            raise ConfigurationError("inner batches need at least two paths")
        if not self.dt > 0.0 or self.min_steps < 1:
            raise ConfigurationError("dt must be positive and min_steps at least 1")

    @classmethod
    def create_default(cls) -> "MCParams":
        return cls()

    @classmethod
    def create_custom(cls, **kwargs: Any) -> "MCParams":
        return cls(**kwargs)

    def replace(self, **changes: Any) -> "MCParams":
        return dataclasses.replace(self, **changes)

    def grid(self, t: float) -> tuple[int, float]:
        m = steps_for(t, self.dt, self.min_steps)
        return m, t / m


def evaluate_field(f: ScalarField, X: np.ndarray) -> np.ndarray:
    values = np.asarray(f.eval(X), dtype=float)
    bad = int(np.count_nonzero(~np.isfinite(values)))
    if bad:
        raise EstimatorError(f"field {f.name} returned non-finite values", count=bad)
    return values


def _require_time(t: float, op: str, allow_zero: bool = False) -> None:
    if t < 0.0 or (t == 0.0 and not allow_zero):
        raise ArgumentError(f"{op} needs t {'>=' if allow_zero else '>'} 0, got {t}")


def _require_direction(*vectors: np.ndarray) -> None:
    for v in vectors:
        if not np.any(v):
            raise ArgumentError("derivative directions must be nonzero")


def _sigma(model: SpectralModel) -> float:
    if model.noise_scale == 0.0:
        raise ArgumentError("derivative weights are undefined for noise_scale = 0")
    return model.noise_scale


def _finish(samples: np.ndarray, op: str, t: float, params: MCParams, n_inner: int = 0, **metadata: Any) -> MCEstimate:
    N = len(samples)
    return MCEstimate(
        value=float(np.mean(samples)),
        std_error=float(np.std(samples, ddof=1) / math.sqrt(N)),
        n_outer=N,
        n_inner=n_inner,
        seed=params.seed,
        t=t,
        op=op,
        metadata=metadata,
    )


def _outer(
    x: np.ndarray,
    t: float,
    indices: np.ndarray,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    directions: Sequence[np.ndarray] = (),
    orders: Sequence[int] = (),
    prefix: tuple[int, ...] = (),
) -> BatchState:
    m, step = params.grid(t)
    dW = brownian_increments(params.seed, indices, m, model.n, step, *prefix)
    return integrate(x, model, G, step, dW, directions, orders)


def _inner(
    Y: np.ndarray,
    s: float,
    keys: Sequence[tuple[int, ...]],
    n_inner: int,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
    directions: Sequence[np.ndarray] = (),
    orders: Sequence[int] = (),
) -> BatchState:
    """n_inner paths from each row of Y, one substream per parent key; rows stay parent-major."""
    m, step = params.grid(s)
    dW = np.concatenate([block_normals(params.seed, key, n_inner, m, model.n) for key in keys]) * math.sqrt(step)
    starts = np.repeat(Y, n_inner, axis=0)
    dirs = [np.repeat(v, n_inner, axis=0) for v in directions]
    return integrate(starts, model, G, step, dW, dirs, orders)


@dataclass
class _InnerD1:
    value: np.ndarray
    value_var: np.ndarray
    deriv: np.ndarray
    deriv_var: np.ndarray


def _inner_d1(
    f: ScalarField,
    s: float,
    Y: np.ndarray,
    directions: Sequence[np.ndarray],
    keys: Sequence[tuple[int, ...]],
    n_inner: int,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
) -> _InnerD1:
    """Per-parent estimates of P(s)f(Y) and of D_R P(s)f(Y) along each (per-parent) direction."""
    state = _inner(Y, s, keys, n_inner, model, G, params, directions, (1,) if directions else ())
    P = Y.shape[0]
    fv = evaluate_field(f, state.x).reshape(P, n_inner)
    terms = (fv[:, :, None] * state.weight1.reshape(P, n_inner, -1)) / (s * _sigma(model)) if directions else np.zeros((P, n_inner, 0))
    return _InnerD1(
        value=fv.mean(axis=1),
        value_var=fv.var(axis=1, ddof=1) / n_inner,
        deriv=terms.mean(axis=1),
        deriv_var=terms.var(axis=1, ddof=1) / n_inner,
    )


def _inner_d2(
    f: ScalarField,
    s: float,
    Y: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    keys: Sequence[tuple[int, ...]],
    n_inner: int,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
) -> np.ndarray:
    """Per-parent nested estimate of D^2_R P(s)f(Y)(a, b): a middle batch to s/2, then inner d1 batches."""
    half = 0.5 * s
    P = Y.shape[0]
    middle = _inner(Y, half, [key + (0,) for key in keys], n_inner, model, G, params, (a, b), (1, 2))
    leaf_keys = [key + (1, mid) for key in keys for mid in range(n_inner)]
    leaf = _inner_d1(f, half, middle.x, [middle.delta1[:, 1]], leaf_keys, n_inner, model, G, params)
    samples = (leaf.deriv[:, 0] * middle.weight1[:, 0] + leaf.value * middle.weight2[(0, 1)]) / (half * _sigma(model))
    return samples.reshape(P, n_inner).mean(axis=1)


# --- single-level samplers ---------------------------------------------------------------


def _pt_samples(f, t, x, model, G, params, prefix=()) -> np.ndarray:
    def run(indices: np.ndarray) -> np.ndarray:
        return evaluate_field(f, _outer(x, t, indices, model, G, params, prefix=prefix).x)

    return np.concatenate(map_blocks(params.n_paths, params.block_size, params.threads, run))


def _d1_samples(f, t, x, h, model, G, params, prefix=()) -> np.ndarray:
    sigma = _sigma(model)

    def run(indices: np.ndarray) -> np.ndarray:
        state = _outer(x, t, indices, model, G, params, (h,), (1,), prefix)
        return evaluate_field(f, state.x) * state.weight1[:, 0] / (t * sigma)

    return np.concatenate(map_blocks(params.n_paths, params.block_size, params.threads, run))


def _grad_pairing(f: ScalarField, X: np.ndarray, v: np.ndarray, model: SpectralModel) -> np.ndarray:
    grad = np.asarray(f.grad_R(X), dtype=float)
    bad = int(np.count_nonzero(~np.isfinite(grad)))
    if bad:
        raise EstimatorError(f"gradient of {f.name} returned non-finite values", count=bad)
    return hr_inner(grad, v, model)


def _d1_smooth_samples(f, t, x, h, model, G, params, prefix=()) -> np.ndarray:
    def run(indices: np.ndarray) -> np.ndarray:
        state = _outer(x, t, indices, model, G, params, (h,), (1,), prefix)
        return _grad_pairing(f, state.x, state.delta1[:, 0], model)

    return np.concatenate(map_blocks(params.n_paths, params.block_size, params.threads, run))


def _d2_smooth_samples(f, t, x, h, k, model, G, params, prefix=()) -> np.ndarray:
    sigma = _sigma(model)

    def run(indices: np.ndarray) -> np.ndarray:
        state = _outer(x, t, indices, model, G, params, (h, k), (1, 2), prefix)
        first = _grad_pairing(f, state.x, state.delta1[:, 1], model) * state.weight1[:, 0]
        second = evaluate_field(f, state.x) * state.weight2[(0, 1)]
        return (first + second) / (t * sigma)

    return np.concatenate(map_blocks(params.n_paths, params.block_size, params.threads, run))


# --- nested samplers ---------------------------------------------------------------------


def _d2_samples(f, t, x, h, k, model, G, params, prefix=(), decomposition: Optional[dict] = None) -> np.ndarray:
    s = 0.5 * t
    sigma = _sigma(model)

    def run(indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        outer = _outer(x, s, indices, model, G, params, (h, k), (1, 2), prefix)
        keys = [(int(Stream.INNER), *prefix, int(i)) for i in indices]
        inner = _inner_d1(f, s, outer.x, [outer.delta1[:, 1]], keys, params.n_inner, model, G, params)
        w1, w2 = outer.weight1[:, 0], outer.weight2[(0, 1)]
        samples = (inner.deriv[:, 0] * w1 + inner.value * w2) / (s * sigma)
        inner_var = (inner.deriv_var[:, 0] * w1**2 + inner.value_var * w2**2) / (s * sigma) ** 2
        return samples, inner_var

    results = map_blocks(params.n_paths, params.block_size, params.threads, run)
    samples = np.concatenate([r[0] for r in results])
    if decomposition is not None:
        inner_var = float(np.mean(np.concatenate([r[1] for r in results])))
        total = float(np.var(samples, ddof=1))
        decomposition.update(total_variance=total, inner_variance=inner_var, outer_variance=max(total - inner_var, 0.0))
    return samples


def _d3_samples(f, t, x, h, k, j, model, G, params, prefix=()) -> np.ndarray:
    if t < params.t_min_d3:
        raise SchemeError(f"bel_d3 refuses t={t} below t_min_d3={params.t_min_d3}")
    s = 0.5 * t
    sigma = _sigma(model)
    n_inner = params.n_inner_d3
    block = max(1, params.block_size // n_inner)

    def run(indices: np.ndarray) -> np.ndarray:
        outer = _outer(x, s, indices, model, G, params, (h, k, j), (1, 2, 3), prefix)
        d_k, d_j = outer.delta1[:, 1], outer.delta1[:, 2]
        transported = [d_k, d_j] if params.fast_d3 else [d_k, d_j, outer.delta2[(1, 2)]]
        keys = [(int(Stream.INNER), *prefix, int(i)) for i in indices]
        first = _inner_d1(f, s, outer.x, transported, keys, n_inner, model, G, params)
        keys2 = [(int(Stream.INNER2), *prefix, int(i)) for i in indices]
        second = _inner_d2(f, s, outer.x, d_k, d_j, keys2, n_inner, model, G, params)
        hessian = second if params.fast_d3 else second + first.deriv[:, 2]
        total = (
            hessian * outer.weight1[:, 0]
            + first.deriv[:, 0] * outer.weight2[(0, 2)]
            + first.deriv[:, 1] * outer.weight2[(0, 1)]
            + first.value * outer.weight3
        )
        return total / (s * sigma)

    return np.concatenate(map_blocks(params.n_paths, block, params.threads, run))


# --- public estimators -------------------------------------------------------------------


def estimate_pt(f: ScalarField, t: float, x: np.ndarray, model: SpectralModel, G: AbstractNonlinearity, params: MCParams) -> MCEstimate:
    """P(t)f(x) = E f(X(t,x)); exact for t = 0 and for constant fields."""
    _require_time(t, "estimate_pt", allow_zero=True)
    x = np.asarray(x, dtype=float)
    model.check_dim(x)
    if t == 0.0 or f.is_constant:
        value = float(f.constant) if f.is_constant else float(evaluate_field(f, x[None, :])[0])
        return MCEstimate(value=value, std_error=0.0, n_outer=params.n_paths, n_inner=0, seed=params.seed, t=t, op="estimate_pt", metadata={"exact": True})
    samples = _pt_samples(f, t, x, model, G, params)
    estimate = _finish(samples, "estimate_pt", t, params)
    if f.sup_bound is not None and abs(estimate.value) > f.sup_bound + 3.0 * estimate.std_error:
        logger.warning(
            f"estimate_pt for {f.name} exceeds its sup bound: {estimate.value:.4g} > {f.sup_bound:.4g}",
            extra={"handler": "estimate_pt", "t": t},
        )
    return estimate


def bel_d1(f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, model: SpectralModel, G: AbstractNonlinearity, params: MCParams) -> MCEstimate:
    """D_R P(t)f(x)h = (1/t) E[f(X(t,x)) int_0^t <delta_1^h, R dW>_R]."""
    _require_time(t, "bel_d1")
    _require_direction(h)
    return _finish(_d1_samples(f, t, x, h, model, G, params), "bel_d1", t, params)


def bel_d2(
    f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, k: np.ndarray, model: SpectralModel, G: AbstractNonlinearity, params: MCParams
) -> MCEstimate:
    """D^2_R P(t)f(x)(h,k) by splitting at t/2; inner batches estimate P(t/2)f and its derivative along delta_1^k."""
    _require_time(t, "bel_d2")
    _require_direction(h, k)
    decomposition: dict[str, float] = {}
    samples = _d2_samples(f, t, x, h, k, model, G, params, decomposition=decomposition)
    estimate = _finish(samples, "bel_d2", t, params, n_inner=params.n_inner, **decomposition)
    logger.debug(
        f"bel_d2 variance split: inner {decomposition['inner_variance']:.3g} of total {decomposition['total_variance']:.3g}",
        extra={"handler": "bel_d2", "t": t, "n_paths": params.n_paths},
    )
    return estimate


def bel_d3(
    f: ScalarField,
    t: float,
    x: np.ndarray,
    h: np.ndarray,
    k: np.ndarray,
    j: np.ndarray,
    model: SpectralModel,
    G: AbstractNonlinearity,
    params: MCParams,
) -> MCEstimate:
    """D^3_R P(t)f(x)(h,k,j) with depth-two nesting; `params.fast_d3` drops the delta_2^{k,j} transport."""
    _require_time(t, "bel_d3")
    _require_direction(h, k, j)
    samples = _d3_samples(f, t, x, h, k, j, model, G, params)
    return _finish(samples, "bel_d3", t, params, n_inner=params.n_inner_d3, fast=params.fast_d3)


def _require_gradient(f: ScalarField, op: str) -> None:
    if f.grad_R is None:
        raise ContractError(f"{op} needs a field with an H_R-gradient; {f.name} has none")


def bel_d1_smooth(
    f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, model: SpectralModel, G: AbstractNonlinearity, params: MCParams
) -> MCEstimate:
    """E <grad_R f(X(t,x)), delta_1^h(t,x)>_R, with the gradient taken at X(t,x)."""
    _require_gradient(f, "bel_d1_smooth")
    _require_time(t, "bel_d1_smooth", allow_zero=True)
    if t == 0.0:
        x = np.asarray(x, dtype=float)
        value = float(_grad_pairing(f, x[None, :], np.asarray(h, dtype=float)[None, :], model)[0])
        return MCEstimate(value=value, std_error=0.0, n_outer=params.n_paths, n_inner=0, seed=params.seed, t=0.0, op="bel_d1_smooth", metadata={"exact": True})
    return _finish(_d1_smooth_samples(f, t, x, h, model, G, params), "bel_d1_smooth", t, params)


def bel_d2_smooth(
    f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, k: np.ndarray, model: SpectralModel, G: AbstractNonlinearity, params: MCParams
) -> MCEstimate:
    _require_gradient(f, "bel_d2_smooth")
    _require_time(t, "bel_d2_smooth")
    _require_direction(h, k)
    return _finish(_d2_smooth_samples(f, t, x, h, k, model, G, params), "bel_d2_smooth", t, params)


# --- common-random-number finite differences ---------------------------------------------

_SAMPLERS: dict[str, Callable[..., np.ndarray]] = {
    "estimate_pt": _pt_samples,
    "bel_d1": _d1_samples,
    "bel_d1_smooth": _d1_smooth_samples,
    "bel_d2": _d2_samples,
    "bel_d2_smooth": _d2_smooth_samples,
}


def make_sampler(op: str, f: ScalarField, t: float, model: SpectralModel, G: AbstractNonlinearity, params: MCParams, *directions: np.ndarray) -> Sampler:
    """x -> per-outer-path samples of an estimator; two calls share their random numbers."""
    try:
        fn = _SAMPLERS[op]
    except KeyError:
        raise ArgumentError(f"no sampler for {op!r}; choose from {sorted(_SAMPLERS)}") from None
    return lambda x: fn(f, t, np.asarray(x, dtype=float), *directions, model, G, params)


def fd_step(n_paths: int, budget: Optional[float] = None) -> float:
    """CRN central-difference step (in H_R units): budget^(1/3), clamped to [1e-4, 1e-1]."""
    budget = 1.0 / math.sqrt(n_paths) if budget is None else budget
    return float(np.clip(budget ** (1.0 / 3.0), 1e-4, 1e-1))


def fd_oracle(
    sampler: Sampler, x: np.ndarray, direction: np.ndarray, model: SpectralModel, n_paths: int, budget: Optional[float] = None, op: str = "fd_oracle"
) -> MCEstimate:
    """Central difference of a sampled quantity along `direction` with common random numbers."""
    _require_direction(direction)
    x = np.asarray(x, dtype=float)
    direction = np.asarray(direction, dtype=float)
    scale = float(hr_norm(direction, model))
    s = fd_step(n_paths, budget)
    unit = direction / scale
    diff = (sampler(x + s * unit) - sampler(x - s * unit)) / (2.0 * s) * scale
    N = len(diff)
    return MCEstimate(
        value=float(np.mean(diff)),
        std_error=float(np.std(diff, ddof=1) / math.sqrt(N)),
        n_outer=N,
        n_inner=0,
        seed=0,
        t=0.0,
        op=op,
        metadata={"step": s},
    )


# --- Ornstein-Uhlenbeck closed forms -----------------------------------------------------


class OUSampler:
    """Exact draws of X(t,x) = e^{tA}x + Q_t^{1/2} Z for G = 0 (Mehler representation).

    `d1_samples` uses the Cameron-Martin weight <Q_t^{-1/2} e^{tA} h, Z>, which needs no time stepping.
    """

    def __init__(self, model: SpectralModel):
        self.model = model

    def _cov(self, t: float) -> np.ndarray:
        return self.model.noise_scale**2 * self.model.ou_covariance(t)

    def normals(self, seed: int, n_paths: int, *key: int) -> np.ndarray:
        return substream(seed, int(Stream.NODE), *key).standard_normal((n_paths, self.model.n))

    def sample(self, t: float, x: np.ndarray, Z: np.ndarray) -> np.ndarray:
        return self.model.exp_diag(t) * np.asarray(x, dtype=float) + np.sqrt(self._cov(t)) * Z

    def pt_samples(self, f: ScalarField, t: float, x: np.ndarray, Z: np.ndarray) -> np.ndarray:
        return evaluate_field(f, self.sample(t, x, Z))

    def gamma(self, t: float, h: np.ndarray) -> np.ndarray:
        """Q_t^{-1/2} e^{tA} h, the Cameron-Martin shift of a unit Gaussian."""
        _require_time(t, "OUSampler.gamma")
        return self.model.exp_diag(t) * np.asarray(h, dtype=float) / np.sqrt(self._cov(t))

    def d1_samples(self, f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, Z: np.ndarray) -> np.ndarray:
        return evaluate_field(f, self.sample(t, x, Z)) * (Z @ self.gamma(t, h))

    def d2_samples(self, f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, k: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Second-order Hermite weight <Gh, Z><Gk, Z> - <Gh, Gk>."""
        gh, gk = self.gamma(t, h), self.gamma(t, k)
        return evaluate_field(f, self.sample(t, x, Z)) * ((Z @ gh) * (Z @ gk) - gh @ gk)


class OUSineOracle:
    """Closed forms for f(x) = sin(omega x_1) under G = 0.

    With m_t = omega (e^{tA}x)_1 and q_t = omega^2 Var(X_1(t)), P(t)f(x) = sin(m_t) e^{-q_t/2} and each
    H_R-derivative along h multiplies by omega (e^{tA}h)_1 and shifts sin to cos.
    """

    def __init__(self, model: SpectralModel, omega: float = 1.0):
        self.model = model
        self.omega = float(omega)

    def _moments(self, t: float, x: np.ndarray) -> tuple[float, float]:
        m = self.omega * float(self.model.exp_diag(t)[0] * np.asarray(x, dtype=float)[0])
        q = self.omega**2 * self.model.noise_scale**2 * float(self.model.ou_covariance(t)[0])
        return m, q

    def _factor(self, t: float, *directions: np.ndarray) -> float:
        out = 1.0
        for v in directions:
            out *= self.omega * float(self.model.exp_diag(t)[0] * np.asarray(v, dtype=float)[0])
        return out

    def value(self, t: float, x: np.ndarray) -> float:
        m, q = self._moments(t, x)
        return math.sin(m) * math.exp(-0.5 * q)

    def d1(self, t: float, x: np.ndarray, h: np.ndarray) -> float:
        m, q = self._moments(t, x)
        return math.cos(m) * math.exp(-0.5 * q) * self._factor(t, h)

    def d2(self, t: float, x: np.ndarray, h: np.ndarray, k: np.ndarray) -> float:
        m, q = self._moments(t, x)
        return -math.sin(m) * math.exp(-0.5 * q) * self._factor(t, h, k)

    def d3(self, t: float, x: np.ndarray, h: np.ndarray, k: np.ndarray, j: np.ndarray) -> float:
        m, q = self._moments(t, x)
        return -math.cos(m) * math.exp(-0.5 * q) * self._factor(t, h, k, j)

    def derivative(self, order: int, t: float, x: np.ndarray, *directions: np.ndarray) -> float:
        return (self.value, self.d1, self.d2, self.d3)[order](t, x, *directions)

    def resolvent(self, lam: float, x: np.ndarray, order: int = 0, *directions: np.ndarray) -> float:
        """int_0^inf e^{-lam s} D^order P(s)f(x)(directions) ds by adaptive quadrature."""
        if lam <= 0.0:
            raise ArgumentError(f"resolvent needs lambda > 0, got {lam}")
        value, _ = sp_integrate.quad(lambda s: math.exp(-lam * s) * self.derivative(order, s, x, *directions), 0.0, np.inf, limit=200)
        return float(value)


_HERMITE = (
    lambda z: np.ones_like(z),
    lambda z: z,
    lambda z: z * z - 1.0,
    lambda z: z**3 - 3.0 * z,
)


class OUMarginalOracle:
    """Deterministic P(t)f and its H_R-derivatives under G = 0 for f(x) = g(x_i).

    X_i(t) is Gaussian with mean m_t and variance q_t, so d^n/dm^n E g(m + sqrt(q) Z) equals
    E[g(m + sqrt(q) Z) He_n(Z)] / q^{n/2}; the expectation is a trapezoid rule on a fine z grid.
    """

    def __init__(self, model: SpectralModel, profile: Callable[[np.ndarray], np.ndarray], index: int = 0, n_nodes: int = 24001):
        self.model = model
        self.profile = profile
        self.index = int(index)
        self.z = np.linspace(-12.0, 12.0, n_nodes)
        self.density = np.exp(-0.5 * self.z**2) / math.sqrt(2.0 * math.pi)

    def derivative(self, order: int, t: float, x: np.ndarray, *directions: np.ndarray) -> float:
        i = self.index
        decay = float(self.model.exp_diag(t)[i])
        m = decay * float(np.asarray(x, dtype=float)[i])
        q = self.model.noise_scale**2 * float(self.model.ou_covariance(t)[i])
        if q == 0.0:
            raise ArgumentError("the marginal oracle needs a nondegenerate Gaussian (t > 0, noise_scale > 0)")
        root = math.sqrt(q)
        integrand = self.profile(m + root * self.z) * _HERMITE[order](self.z) * self.density
        value = float(sp_integrate.trapezoid(integrand, self.z)) / root**order
        for v in directions:
            value *= decay * float(np.asarray(v, dtype=float)[i])
        return value


Oracle = Union[OUSineOracle, OUMarginalOracle]


def closed_form_oracle(f: ScalarField, model: SpectralModel) -> Oracle:
    """The Ornstein-Uhlenbeck closed form for a catalog field, valid under G = 0 only."""
    if "omega" in f.metadata and f.metadata.get("index", 0) == 0:
        return OUSineOracle(model, f.metadata["omega"])
    if "profile" in f.metadata:
        return OUMarginalOracle(model, f.metadata["profile"], f.metadata.get("index", 0))
    raise ConfigurationError(f"field {f.name} has no closed-form Ornstein-Uhlenbeck oracle")


# --- Hölder transport --------------------------------------------------------------------


@dataclass
class TransportReport:
    difference: float
    std_error: float
    bound: float

    @property
    def ok(self) -> bool:
        return abs(self.difference) <= self.bound + 3.0 * self.std_error


def holder_transport_check(
    f: ScalarField, t: float, x: np.ndarray, h: np.ndarray, model: SpectralModel, G: AbstractNonlinearity, params: MCParams
) -> TransportReport:
    """|P(t)f(x+h) - P(t)f(x)| under common random numbers against e^{alpha zeta_R t}[f]_alpha ||h||_R^alpha."""
    if f.declared_class is not FieldClass.HOLDER or f.alpha is None or f.holder_seminorm is None:
        raise ContractError(f"holder_transport_check needs a certified Hölder field; {f.name} is {f.declared_class.value}")
    _require_time(t, "holder_transport_check")
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    diff = _pt_samples(f, t, x + h, model, G, params) - _pt_samples(f, t, x, model, G, params)
    zeta = compute_constants(model, G.M).zeta_R
    bound = math.exp(f.alpha * zeta * t) * f.holder_seminorm * float(hr_norm(h, model)) ** f.alpha
    return TransportReport(
        difference=float(np.mean(diff)),
        std_error=float(np.std(diff, ddof=1) / math.sqrt(len(diff))),
        bound=bound,
    )
