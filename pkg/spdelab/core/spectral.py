"""Diagonal spectral truncation of the state space.

Everything is expressed in the eigenbasis e_1..e_n of Q, so the operators A = -(1/2)Q^{-beta} and
R = Q^{rho} act componentwise: (Ax)_k = a_k x_k with a_k = -(1/2) lambda_k^{-beta}, and (Rx)_k = r_k x_k with
r_k = lambda_k^{rho}. The H_R geometry is <x, y>_R = sum_k x_k y_k / r_k^2.

States may be single vectors of shape (n,) or batches of shape (..., n).
"""

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import integrate

from .errors import ArgumentError, ConfigurationError

logger = logging.getLogger(__name__)

_RULE = re.compile(r"^\s*k\s*\^\s*(-?\d+(?:\.\d+)?)\s*$")


def eigenvalues_from_rule(rule: str, n: int) -> np.ndarray:
    """Parse a spectrum rule such as "k^-2" into lambda_k for k = 1..n."""
    match = _RULE.match(rule)
    if match is None:
        raise ConfigurationError(f"unsupported spectrum rule {rule!r}; expected 'k^-p'")
    power = float(match.group(1))
    if power > 0:
        raise ConfigurationError(f"spectrum rule {rule!r} gives increasing eigenvalues")
    return np.arange(1, n + 1, dtype=float) ** power


@dataclass(frozen=True, eq=False)
class SpectralModel:
    n: int
    q_eigs: np.ndarray
    beta: float = 1.0
    rho: float = 0.5
    trace_exponent: float = 0.5
    noise_scale: float = 1.0
    a: np.ndarray = field(init=False, repr=False, compare=False)
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = np.asarray(self.q_eigs, dtype=float).copy()
        if self.n < 1:
            raise ConfigurationError(f"truncation dimension must be positive, got {self.n}")
        if q.shape != (self.n,):
            raise ConfigurationError(f"expected {self.n} eigenvalues of Q, got shape {q.shape}")
        if np.any(~np.isfinite(q)) or np.any(q <= 0.0):
            raise ConfigurationError("eigenvalues of Q must be finite and positive")
        if np.any(np.diff(q) > 0.0):
            raise ConfigurationError("eigenvalues of Q must be nonincreasing (lambda_k <= lambda_1)")
        if self.beta < 0.0:
            raise ConfigurationError(f"beta must be nonnegative, got {self.beta}")
        if self.rho < 0.0:
            raise ConfigurationError(f"rho must be nonnegative, got {self.rho}")
        if not 0.0 < self.trace_exponent < 1.0:
            raise ConfigurationError(f"trace_exponent must lie in (0, 1), got {self.trace_exponent}")
        if self.noise_scale < 0.0:
            raise ConfigurationError(f"noise_scale must be nonnegative, got {self.noise_scale}")

        a = -0.5 * q ** (-self.beta)
        r = q**self.rho
        for arr in (q, a, r):
            arr.setflags(write=False)
        object.__setattr__(self, "q_eigs", q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", r)

        if not math.isfinite(self.trace_integral(1.0)):
            raise ConfigurationError("trace condition integral diverges on [0, 1]")
        if self.noise_scale != 1.0:
            logger.info(
                f"Model uses noise_scale={self.noise_scale}; the equation is not the unscaled one",
                extra={"handler": "SpectralModel", "noise_scale": self.noise_scale},
            )

    @classmethod
    def create_default(cls, n: int = 8) -> "SpectralModel":
        """lambda_k = k^-2, beta = 1, rho = 1/2."""
        return cls(n=n, q_eigs=eigenvalues_from_rule("k^-2", n), beta=1.0, rho=0.5)

    @classmethod
    def create_custom(
        cls,
        n: int = 8,
        q_eigs: Union[str, Sequence[float]] = "k^-2",
        beta: float = 1.0,
        rho: float = 0.5,
        trace_exponent: float = 0.5,
        noise_scale: float = 1.0,
    ) -> "SpectralModel":
        eigs = eigenvalues_from_rule(q_eigs, n) if isinstance(q_eigs, str) else np.asarray(q_eigs, dtype=float)
        return cls(n=n, q_eigs=eigs, beta=beta, rho=rho, trace_exponent=trace_exponent, noise_scale=noise_scale)

    @property
    def R_norm(self) -> float:
        return float(np.max(self.r))

    @property
    def w_R(self) -> float:
        return float(np.max(self.a))

    def check_dim(self, *arrays: np.ndarray) -> None:
        for arr in arrays:
            if np.shape(arr)[-1:] != (self.n,):
                raise ConfigurationError(f"vector of shape {np.shape(arr)} does not match truncation dimension {self.n}")

    def basis(self, k: int) -> np.ndarray:
        e = np.zeros(self.n)
        e[k] = 1.0
        return e

    def unit_hr(self, k: int) -> np.ndarray:
        """r_k e_k, the k-th element of the orthonormal H_R frame (0-based)."""
        return self.r[k] * self.basis(k)

    def exp_diag(self, t: float) -> np.ndarray:
        if t < 0.0:
            raise ArgumentError(f"semigroup time must be nonnegative, got {t}")
        return np.exp(self.a * t)

    def phi1(self, dt: float) -> np.ndarray:
        """Diagonal of A^{-1}(e^{dt A} - I), the exact integral of e^{(dt-s)A} over one step."""
        return np.expm1(self.a * dt) / self.a

    def ou_covariance(self, t: float) -> np.ndarray:
        """Diagonal of Q_t = int_0^t e^{sA} R^2 e^{sA*} ds."""
        if t < 0.0:
            raise ArgumentError(f"covariance time must be nonnegative, got {t}")
        return self.r**2 * np.expm1(2.0 * self.a * t) / (2.0 * self.a)

    def controllability_norm(self, t: float) -> float:
        """Operator norm of Q_t^{-1/2} e^{tA}."""
        if t <= 0.0:
            raise ArgumentError(f"controllability norm needs t > 0, got {t}")
        return float(np.max(np.exp(self.a * t) / np.sqrt(self.ou_covariance(t))))

    def trace_integral(self, T: float) -> float:
        """int_0^T t^{-eta} Trace[e^{tA} R^2 e^{tA*}] dt, integrated mode by mode."""
        total = 0.0
        for a_k, r_k in zip(self.a, self.r):
            value, _ = integrate.quad(lambda s, a_k=a_k: np.exp(2.0 * a_k * s), 0.0, T, weight="alg", wvar=(-self.trace_exponent, 0.0))
            total += r_k**2 * value
        return float(total)

    def describe(self) -> dict:
        return {
            "n": self.n,
            "q_eigs": [float(v) for v in self.q_eigs],
            "beta": self.beta,
            "rho": self.rho,
            "trace_exponent": self.trace_exponent,
            "noise_scale": self.noise_scale,
        }


@dataclass(frozen=True)
class ModelConstants:
    zeta_R: float
    w_R: float
    M: float
    M2: float
    M3: float
    B: float
    theta: float
    R_norm: float

    def as_dict(self) -> dict:
        return {
            "zeta_R": self.zeta_R,
            "w_R": self.w_R,
            "M": self.M,
            "M2": self.M2,
            "M3": self.M3,
            "B": self.B,
            "theta": self.theta,
            "R_norm": self.R_norm,
        }


def hr_inner(x: np.ndarray, y: np.ndarray, model: SpectralModel) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    model.check_dim(x, y)
    return np.sum(x * y / model.r**2, axis=-1)


def hr_norm(x: np.ndarray, model: SpectralModel) -> np.ndarray:
    return np.sqrt(hr_inner(x, x, model))


def apply_exp_A(t: float, x: np.ndarray, model: SpectralModel) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    model.check_dim(x)
    return model.exp_diag(t) * x


def compute_constants(model: SpectralModel, M: float) -> ModelConstants:
    if M < 0.0:
        raise ConfigurationError(f"derivative bound M must be nonnegative, got {M}")
    R_norm = model.R_norm
    w_R = model.w_R
    M2 = M * R_norm**2
    M3 = M * max(3.0 * M2, R_norm) * R_norm**2
    return ModelConstants(zeta_R=w_R + R_norm * M, w_R=w_R, M=M, M2=M2, M3=M3, B=1.0, theta=w_R, R_norm=R_norm)


def k_bounds(t: float, zeta_R: float) -> tuple[float, float]:
    """K_1(t, zeta_R) and K_2(t, zeta_R) of the variational-process bounds."""
    if t <= 0.0:
        raise ArgumentError(f"k_bounds needs t > 0, got {t}")
    if zeta_R == 0.0:
        return t, 0.5 * t**2 + t
    growth = math.exp(t * zeta_R)
    ratio = math.expm1(t * zeta_R) / zeta_R
    K1 = growth * ratio
    # (1+z)e^{tz} + z - 1 = (1+z)(e^{tz}-1) + 2z
    K2 = 0.5 * growth * ratio * ((1.0 + zeta_R) * ratio + 2.0)
    return K1, K2


def cappone_majorant(t: float, zeta_R: float) -> float:
    """(1+|z|)/z^2 * max{e^{tz}, e^{3tz}}, valid for zeta_R != 0."""
    if zeta_R == 0.0:
        raise ArgumentError("the simplified majorant is only defined for zeta_R != 0")
    if t <= 0.0:
        raise ArgumentError(f"majorant needs t > 0, got {t}")
    return (1.0 + abs(zeta_R)) / zeta_R**2 * max(math.exp(t * zeta_R), math.exp(3.0 * t * zeta_R))
