from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np
from typing_extensions import Protocol


class FieldClass(Enum):
    BUC = "buc"
    XFRAK = "xfrak"
    HOLDER = "holder"
    SMOOTH = "smooth"


class FieldEvaluator(Protocol):
    def __call__(self, x: np.ndarray) -> np.ndarray: ...


class GradientEvaluator(Protocol):
    def __call__(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class ScalarField:
    """A test function f on the truncated space.

    `eval` maps a batch of states of shape (P, n) to values of shape (P,); `grad_R`, when present,
    maps the same batch to H_R-gradients of shape (P, n). `alpha`/`holder_seminorm` are only
    meaningful for the Hölder class, `xfrak_norm` (sup norm plus sup of the H_R-derivative) for
    fields in the 𝔛 or smooth class.
    """

    name: str
    eval: FieldEvaluator
    declared_class: FieldClass
    sup_bound: Optional[float] = None
    grad_R: Optional[GradientEvaluator] = None
    alpha: Optional[float] = None
    holder_seminorm: Optional[float] = None
    xfrak_norm: Optional[float] = None
    lipschitz_R: Optional[float] = None
    constant: Optional[float] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.eval(np.atleast_2d(x))

    def holder_norm(self) -> float:
        if self.sup_bound is None or self.holder_seminorm is None:
            raise ValueError(f"field {self.name} has no certified Hölder norm")
        return self.sup_bound + self.holder_seminorm

    def scaled(self, c: float) -> "ScalarField":
        grad = self.grad_R
        return ScalarField(
            name=f"{c}*{self.name}",
            eval=lambda x: c * self.eval(x),
            declared_class=self.declared_class,
            sup_bound=None if self.sup_bound is None else abs(c) * self.sup_bound,
            grad_R=None if grad is None else (lambda x: c * grad(x)),
            alpha=self.alpha,
            holder_seminorm=None if self.holder_seminorm is None else abs(c) * self.holder_seminorm,
            xfrak_norm=None if self.xfrak_norm is None else abs(c) * self.xfrak_norm,
            lipschitz_R=None if self.lipschitz_R is None else abs(c) * self.lipschitz_R,
            constant=None if self.constant is None else c * self.constant,
        )


class TimeFieldProtocol(Protocol):
    def __call__(self, s: float) -> ScalarField: ...


@dataclass
class MCEstimate:
    value: float
    std_error: float
    n_outer: int
    n_inner: int
    seed: int
    t: float
    op: str = ""
    metadata: dict[str, Any] = field(default_factory=dict)

    def z_score(self, target: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.value == target else float("inf")
        return abs(self.value - target) / self.std_error

    def agrees_with(self, target: float, n_sigma: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= n_sigma * self.std_error + atol

    def to_record(self, inputs_hash: str) -> dict[str, Any]:
        return {
            "op": self.op,
            "inputs_hash": inputs_hash,
            "value": self.value,
            "std_error": self.std_error,
            "n_outer": self.n_outer,
            "n_inner": self.n_inner,
            "seed": self.seed,
        }


def combined_sigma(*estimates: MCEstimate) -> float:
    return float(np.sqrt(sum(e.std_error**2 for e in estimates)))


@dataclass
class RateFit:
    times: np.ndarray
    values: np.ndarray
    slope: float
    slope_ci: float
    intercept: float
    residual: float
    std_errors: Optional[np.ndarray] = None
    excluded: list[float] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def within(self, target: float, tolerance: float) -> bool:
        return abs(self.slope - target) <= tolerance

    def as_dict(self) -> dict[str, Any]:
        return {
            "times": [float(t) for t in self.times],
            "values": [float(v) for v in self.values],
            "std_errors": None if self.std_errors is None else [float(s) for s in self.std_errors],
            "slope": self.slope,
            "slope_ci": self.slope_ci,
            "intercept": self.intercept,
            "residual": self.residual,
            "excluded": [float(t) for t in self.excluded],
            "metadata": self.metadata,
        }


class AbstractNonlinearity(ABC):
    """The drift nonlinearity G and its first three derivatives.

    All evaluators are batched: `x`, `h`, `k`, `j` have shape (P, n) and results have shape (P, n).
    """

    name: str = "abstract"

    def __init__(self, **kwargs):
        self.params: dict[str, float] = dict(kwargs)
        self.M = 0.0

    @property
    def is_zero(self) -> bool:
        return False

    @abstractmethod
    def eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def d1(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def d2(self, x: np.ndarray, h: np.ndarray, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def d3(self, x: np.ndarray, h: np.ndarray, k: np.ndarray, j: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "M": self.M, **self.params}


class OnMetricProtocol(Protocol):
    def __call__(
        self,
        name: str,
        value: float,
        std_error: Optional[float] = None,
        target: Optional[float] = None,
        tolerance: Optional[float] = None,
        comparison: str = "info",
    ) -> None: ...


class OnEstimateProtocol(Protocol):
    def __call__(
        self,
        name: str,
        estimate: MCEstimate,
        target: Optional[float] = None,
        tolerance: Optional[float] = None,
        comparison: str = "info",
    ) -> None: ...


class OnSeriesProtocol(Protocol):
    def __call__(self, name: str, x: Sequence[float], y: Sequence[float]) -> None: ...


class OnDetailProtocol(Protocol):
    def __call__(self, key: str, value: Any) -> None: ...


class AbstractExperiment(ABC):
    """Orchestrates one experiment kind; results leave through the metric, series and detail callbacks."""

    kind: str = "abstract"

    def __init__(self, **kwargs):
        self.on_metric: Optional[OnMetricProtocol] = None
        self.on_estimate: Optional[OnEstimateProtocol] = None
        self.on_series: Optional[OnSeriesProtocol] = None
        self.on_detail: Optional[OnDetailProtocol] = None

    def setup(
        self,
        on_metric: Optional[OnMetricProtocol] = None,
        on_estimate: Optional[OnEstimateProtocol] = None,
        on_series: Optional[OnSeriesProtocol] = None,
        on_detail: Optional[OnDetailProtocol] = None,
    ):
        self.on_metric = on_metric
        self.on_estimate = on_estimate
        self.on_series = on_series
        self.on_detail = on_detail
        return self

    def metric(self, name: str, value: float, **kwargs: Any) -> None:
        if self.on_metric is not None:
            self.on_metric(name, value, **kwargs)

    def estimate(self, name: str, estimate: MCEstimate, **kwargs: Any) -> None:
        if self.on_estimate is not None:
            self.on_estimate(name, estimate, **kwargs)

    def series(self, name: str, x: Sequence[float], y: Sequence[float]) -> None:
        if self.on_series is not None:
            self.on_series(name, x, y)

    def detail(self, key: str, value: Any) -> None:
        if self.on_detail is not None:
            self.on_detail(key, value)

    @abstractmethod
    def run(self) -> None:
        raise NotImplementedError
