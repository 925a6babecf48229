"""Fixed point psi = f + T psi with (T psi)(x) = <F(x), grad_R R(lam, L) psi(x)>_R for the Ornstein-Uhlenbeck generator L.

psi lives on a lattice in the span of the first `dims` frame vectors r_i e_i and is extended
off-lattice by multilinear interpolation of its active coordinates (clamped to the lattice box).
The gradient of the resolvent uses exact Ornstein-Uhlenbeck draws with Cameron-Martin weights.
The draws are antithetic and fixed across iterations, so T is one linear map and the iteration
contracts geometrically when its norm is below one.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from spdelab.core.base import ScalarField
from spdelab.core.errors import ArgumentError, ConfigurationError, DivergenceError
from spdelab.core.estimators import MCParams, OUSampler, evaluate_field
from spdelab.core.spectral import SpectralModel, compute_constants

from .quadrature import QuadratureScheme
from .resolvent import node_params

logger = logging.getLogger(__name__)


@dataclass
class DriftField:
    """A bounded map F from the state space into H_R; `eval` maps (P, n) states to (P, n) vectors."""

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    holder_seminorm: float = 0.0


def constant_drift(model: SpectralModel, delta: float, index: int = 0) -> DriftField:
    """F = delta r_i e_i, of H_R norm |delta|."""
    v = delta * model.unit_hr(index)
    return DriftField(name=f"const-drift:delta={delta:g},index={index}", eval=lambda X: np.broadcast_to(v, np.shape(X)).copy(), sup_norm=abs(delta))


def zero_drift(model: SpectralModel) -> DriftField:
    return DriftField(name="zero-drift", eval=lambda X: np.zeros(np.shape(X)), sup_norm=0.0)


@dataclass
class SchvarLattice:
    dims: int = 2
    points: int = 17
    extent: float = 2.0

    def __post_init__(self):
        if self.dims < 1 or self.points < 2 or not self.extent > 0.0:
            raise ConfigurationError("lattice needs dims >= 1, points >= 2 and a positive extent")

    @classmethod
    def create_default(cls) -> "SchvarLattice":
        return cls()

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(-self.extent, self.extent, self.points) for _ in range(self.dims))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dims

    def coordinates(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def states(self, model: SpectralModel) -> np.ndarray:
        """Lattice points as states: sum_i u_i r_i e_i."""
        if self.dims > model.n:
            raise ConfigurationError(f"lattice dims {self.dims} exceed the truncation dimension {model.n}")
        X = np.zeros((self.points**self.dims, model.n))
        X[:, : self.dims] = self.coordinates() * model.r[: self.dims]
        return X


@dataclass
class SchvarResult:
    lattice: SchvarLattice
    psi: np.ndarray
    u: np.ndarray
    trace: list[float]
    residual: float
    sigma: float
    converged: bool
    warnings: list[str] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [b / a for a, b in zip(self.trace, self.trace[1:]) if a > 0.0]

    @property
    def factor(self) -> float:
        """Median successive-difference ratio after the second iteration (0 when the trace stops early)."""
        tail = self.ratios[1:] or self.ratios
        return float(np.median(tail)) if tail else 0.0

    def geometric(self, tolerance: float = 0.2) -> bool:
        tail = self.ratios[1:]
        if len(tail) < 2:
            return True
        factor = self.factor
        return all(abs(r - factor) <= tolerance * factor for r in tail)

    def as_dict(self) -> dict[str, Any]:
        return {
            "iterations": len(self.trace),
            "trace": self.trace,
            "ratios": self.ratios,
            "factor": self.factor,
            "geometric": self.geometric(),
            "residual": self.residual,
            "sigma": self.sigma,
            "converged": self.converged,
            "warnings": self.warnings,
        }


class _ResolventGradient:
    """grad_R R(lam, L) on lattice functions, frozen on one set of antithetic Gaussian draws."""

    def __init__(self, lattice: SchvarLattice, scheme: QuadratureScheme, model: SpectralModel, params: MCParams):
        self.lattice = lattice
        self.weights = scheme.laplace_weights
        d = lattice.dims
        states = lattice.states(model)
        sampler = OUSampler(model)
        frame = [model.unit_hr(i) for i in range(d)]
        half = max(1, params.n_paths // 2)
        self.coords, self.scores = [], []
        for j, s in enumerate(scheme.nodes):
            Z = sampler.normals(node_params(params, j).seed, half)
            Z = np.vstack([Z, -Z])
            X = sampler.sample(float(s), states[:, None, :], Z[None, :, :])
            self.coords.append(np.clip(X[:, :, :d] / model.r[:d], -lattice.extent, lattice.extent))
            self.scores.append(np.stack([Z @ sampler.gamma(float(s), e) for e in frame], axis=1))
        self.n_samples = 2 * half

    def _values(self, psi: np.ndarray, j: int) -> np.ndarray:
        interp = RegularGridInterpolator(self.lattice.axes, psi.reshape(self.lattice.shape))
        coords = self.coords[j]
        return interp(coords.reshape(-1, self.lattice.dims)).reshape(coords.shape[:2])

    def gradient(self, psi: np.ndarray) -> np.ndarray:
        """(L, dims) frame components of grad_R R(lam)psi at the lattice points."""
        out = 0.0
        for j, w in enumerate(self.weights):
            out = out + w * (self._values(psi, j) @ self.scores[j]) / self.n_samples
        return np.asarray(out)

    def resolvent(self, psi: np.ndarray) -> np.ndarray:
        return np.asarray(sum(w * self._values(psi, j).mean(axis=1) for j, w in enumerate(self.weights)))

    def pairing_samples(self, psi: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
        """(L, N) per-draw samples of <F, grad_R R(lam)psi>_R."""
        out = 0.0
        for j, w in enumerate(self.weights):
            out = out + w * self._values(psi, j) * (coefficients @ self.scores[j].T)
        return np.asarray(out)


def schvar_solve(
    F: DriftField,
    f: ScalarField,
    lam: float,
    model: SpectralModel,
    params: MCParams,
    lattice: Optional[SchvarLattice] = None,
    max_iters: int = 50,
    tol: float = 1e-10,
    n_nodes: int = 16,
) -> SchvarResult:
    """Picard iteration psi_{m+1} = f + T psi_m on the lattice.

    Raises DivergenceError once a successive-difference ratio after the second iteration reaches 1.
    """
    if not lam > 0.0:
        raise ArgumentError(f"schvar_solve needs lambda > 0, got {lam}")
    lattice = lattice or SchvarLattice.create_default()
    states = lattice.states(model)
    zeta = compute_constants(model, 0.0).zeta_R
    scheme = QuadratureScheme.create(lam, order=1, alpha=f.alpha or 0.0, zeta_R=zeta, sup_bound=f.sup_bound or 1.0, n_nodes=n_nodes)
    op = _ResolventGradient(lattice, scheme, model, params)
    coefficients = np.asarray(F.eval(states), dtype=float)[:, : lattice.dims] / model.r[: lattice.dims]

    def T(psi: np.ndarray) -> np.ndarray:
        return np.sum(coefficients * op.gradient(psi), axis=1)

    f_values = evaluate_field(f, states)
    psi = f_values.copy()
    trace: list[float] = []
    converged = False
    for iteration in range(1, max_iters + 1):
        new = f_values + T(psi)
        diff = float(np.max(np.abs(new - psi)))
        trace.append(diff)
        psi = new
        logger.debug(f"Picard iteration {iteration}: sup difference {diff:.3g}", extra={"handler": "schvar_solve", "iteration": iteration})
        if diff <= tol * max(1.0, float(np.max(np.abs(psi)))):
            converged = True
            break
        if iteration > 2 and trace[-2] > 0.0 and diff / trace[-2] >= 1.0:
            raise DivergenceError(f"Picard iteration for {F.name} does not contract; reduce ||F|| (currently {F.sup_norm:g})", factor=diff / trace[-2])

    residual = float(np.max(np.abs(psi - T(psi) - f_values)))
    samples = op.pairing_samples(psi, coefficients)
    sigma = float(np.max(np.std(samples, axis=1, ddof=1)) / math.sqrt(samples.shape[1]))
    result = SchvarResult(lattice, psi, op.resolvent(psi), trace, residual, sigma, converged)
    if not converged:
        result.warnings.append(f"no convergence to tol={tol:g} within {max_iters} iterations")
        logger.warning(result.warnings[-1], extra={"handler": "schvar_solve", "iteration": max_iters})
    logger.info(
        f"schvar_solve for {F.name}: {len(trace)} iterations, factor {result.factor:.4g}, residual {residual:.3g}",
        extra={"handler": "schvar_solve", "op": F.name},
    )
    return result
