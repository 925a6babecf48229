"""Graded composite midpoint rules for Laplace-type integrals int_0^inf e^{-lam s} g(s) ds."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from spdelab.core.errors import ArgumentError, ConfigurationError, SchemeError

logger = logging.getLogger(__name__)

TAIL_FACTOR = 1e-4


def grading_exponent(order: int, alpha: float = 0.0) -> float:
    """1/(1-p) for an integrand blowing up like s^{-p}, p = (order - alpha)/2."""
    p = max(0.0, (order - alpha) / 2.0)
    if p >= 1.0:
        raise ConfigurationError(f"order {order} with alpha={alpha} gives a non-integrable singularity s^-{p:g}")
    return 1.0 / (1.0 - p)


def decay_rate(lam: float, zeta_R: float) -> tuple[float, bool]:
    """lam - 4|zeta_R| when positive, else lam; the flag says whether the stronger control applies."""
    shifted = lam - 4.0 * abs(zeta_R)
    return (shifted, True) if shifted > 0.0 else (lam, False)


@dataclass
class QuadratureScheme:
    """Nodes and weights on (0, t_cut] such that int_0^t_cut e^{-lam s} g(s) ds ~ sum w_j e^{-lam s_j} g(s_j).

    Cells are t_j = (j/J)^grading t_cut, each node is its cell midpoint, and the weight is the exact
    integral of e^{-lam s} over the cell divided by e^{-lam s_j}, so the rule is exact on constants.
    """

    lam: float
    t_cut: float
    nodes: np.ndarray
    weights: np.ndarray
    grading: float = 1.0
    tail_bound: float = 0.0
    budget: float = 5e-3
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ArgumentError(f"the resolvent needs lambda > 0, got {self.lam}")
        if not self.t_cut > 0.0:
            raise ConfigurationError(f"t_cut must be positive, got {self.t_cut}")
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.nodes.shape != self.weights.shape or self.nodes.ndim != 1:
            raise ConfigurationError("nodes and weights must be matching 1-d arrays")
        if np.any(self.nodes <= 0.0) or np.any(self.nodes > self.t_cut):
            raise ConfigurationError("quadrature nodes must lie in (0, t_cut]")
        if self.tail_bound > self.budget:
            raise SchemeError(f"quadrature tail bound {self.tail_bound:.3g} exceeds the error budget {self.budget:.3g}; raise t_cut")

    @classmethod
    def create(
        cls,
        lam: float,
        order: int = 0,
        alpha: float = 0.0,
        zeta_R: float = 0.0,
        sup_bound: float = 1.0,
        n_nodes: int = 32,
        t_cut: Optional[float] = None,
        budget: float = 5e-3,
    ) -> "QuadratureScheme":
        if not lam > 0.0:
            raise ArgumentError(f"the resolvent needs lambda > 0, got {lam}")
        if n_nodes < 1:
            raise ConfigurationError("a quadrature scheme needs at least one node")
        rate, strong = decay_rate(lam, zeta_R)
        warnings = []
        if not strong:
            warnings.append(f"lambda={lam:g} <= 4|zeta_R|={4.0 * abs(zeta_R):.3g}: tail controlled by e^(-lambda t) only")
            logger.warning(warnings[-1], extra={"handler": "QuadratureScheme", "op": "t_cut"})
        if t_cut is None:
            t_cut = math.log(1.0 / TAIL_FACTOR) / rate
        gamma = grading_exponent(order, alpha)
        edges = t_cut * (np.arange(n_nodes + 1) / n_nodes) ** gamma
        left, width = edges[:-1], np.diff(edges)
        nodes = left + 0.5 * width
        cell = np.exp(-lam * left) * -np.expm1(-lam * width) / lam
        weights = cell * np.exp(lam * nodes)
        p = max(0.0, (order - alpha) / 2.0)
        tail = math.exp(-rate * t_cut) * abs(sup_bound) * t_cut**-p / rate
        return cls(lam=lam, t_cut=t_cut, nodes=nodes, weights=weights, grading=gamma, tail_bound=tail, budget=budget, warnings=warnings)

    @classmethod
    def create_default(cls, lam: float) -> "QuadratureScheme":
        return cls.create(lam)

    @property
    def laplace_weights(self) -> np.ndarray:
        """w_j e^{-lam s_j}, the factors multiplying g(s_j)."""
        return self.weights * np.exp(-self.lam * self.nodes)

    def constant_error(self) -> float:
        return float(abs(np.sum(self.laplace_weights) + math.expm1(-self.lam * self.t_cut) / self.lam))

    def describe(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "t_cut": self.t_cut,
            "n_nodes": len(self.nodes),
            "grading": self.grading,
            "tail_bound": self.tail_bound,
        }


def midpoint_nodes(t: float, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform midpoint rule on [0, t]: (nodes, cell widths)."""
    if not t > 0.0:
        raise ArgumentError(f"time integrals need t > 0, got {t}")
    width = t / n_nodes
    return (np.arange(n_nodes) + 0.5) * width, np.full(n_nodes, width)
