"""Built-in test fields, addressable by name ("sin:omega=50", "holder:alpha=0.5", ...).

H_R quantities depend on R, so every field is built against a SpectralModel. A field acting on
coordinate i sees an H_R increment h through h_i = r_i (R^{-1}h)_i, which is why seminorms and
gradients pick up powers of r_i.
"""

import logging
import math
from functools import lru_cache
from typing import Any, Callable

import numpy as np

from spdelab.core.base import FieldClass, ScalarField
from spdelab.core.errors import ConfigurationError
from spdelab.core.spectral import SpectralModel

from .seminorms import brute_force_holder_1d

logger = logging.getLogger(__name__)


def constant_field(model: SpectralModel, c: float = 1.0) -> ScalarField:
    c = float(c)
    return ScalarField(
        name=f"const:c={c:g}",
        eval=lambda x: np.full(np.shape(x)[0], c),
        declared_class=FieldClass.SMOOTH,
        sup_bound=abs(c),
        grad_R=lambda x: np.zeros_like(x, dtype=float),
        holder_seminorm=0.0,
        xfrak_norm=abs(c),
        lipschitz_R=0.0,
        constant=c,
        metadata={"profile": lambda s: np.full(np.shape(s), c)},
    )


def sine_field(model: SpectralModel, omega: float = 1.0, index: int = 0) -> ScalarField:
    """sin(omega x_i); grad_R f = R^2 grad f = r_i^2 omega cos(omega x_i) e_i."""
    omega = float(omega)
    i = int(index)
    r_i = float(model.r[i])

    def grad(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=float)
        out[:, i] = r_i**2 * omega * np.cos(omega * x[:, i])
        return out

    return ScalarField(
        name=f"sin:omega={omega:g}" + (f",index={i}" if i else ""),
        eval=lambda x: np.sin(omega * x[:, i]),
        declared_class=FieldClass.XFRAK,
        sup_bound=1.0,
        grad_R=grad,
        xfrak_norm=1.0 + omega * r_i,
        lipschitz_R=omega * r_i,
        metadata={"omega": omega, "index": i, "profile": lambda s: np.sin(omega * s)},
    )


@lru_cache(maxsize=32)
def certified_holder_constant(alpha: float) -> float:
    """1-d brute-force seminorm of s -> min(|s|^alpha, 1)."""
    return brute_force_holder_1d(lambda s: np.minimum(np.abs(s) ** alpha, 1.0), alpha)


def holder_field(model: SpectralModel, alpha: float = 0.5, index: int = 0) -> ScalarField:
    """min(|x_i|^alpha, 1): alpha-Hölder along H_R with [f] = r_i^alpha times the 1-d constant."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"holder field needs alpha in (0, 1), got {alpha}")
    i = int(index)
    seminorm = float(model.r[i]) ** alpha * certified_holder_constant(alpha)
    return ScalarField(
        name=f"holder:alpha={alpha:g}" + (f",index={i}" if i else ""),
        eval=lambda x: np.minimum(np.abs(x[:, i]) ** alpha, 1.0),
        declared_class=FieldClass.HOLDER,
        sup_bound=1.0,
        alpha=alpha,
        holder_seminorm=seminorm,
        metadata={"index": i, "certified_1d": certified_holder_constant(alpha), "profile": lambda s: np.minimum(np.abs(s) ** alpha, 1.0)},
    )


def ramp_field(model: SpectralModel, width: float = 0.001, index: int = 0) -> ScalarField:
    """clip(x_i / width, -1, 1): bounded and uniformly continuous, with a kink of slope 1/width."""
    width = float(width)
    if width <= 0.0:
        raise ConfigurationError(f"ramp width must be positive, got {width}")
    i = int(index)
    return ScalarField(
        name=f"ramp:width={width:g}" + (f",index={i}" if i else ""),
        eval=lambda x: np.clip(x[:, i] / width, -1.0, 1.0),
        declared_class=FieldClass.BUC,
        sup_bound=1.0,
        lipschitz_R=float(model.r[i]) / width,
        metadata={"width": width, "index": i, "profile": lambda s: np.clip(s / width, -1.0, 1.0)},
    )


def gauss_field(model: SpectralModel, scale: float = 1.0) -> ScalarField:
    """exp(-||x||^2 / (2 scale^2)); smooth with grad_R f = -R^2 x f / scale^2."""
    scale = float(scale)

    def value(x: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * np.sum(x * x, axis=-1) / scale**2)

    # sup_x ||x|| e^{-||x||^2/2s^2} / s^2 = e^{-1/2} / s
    lip = model.R_norm * math.exp(-0.5) / scale
    return ScalarField(
        name=f"gauss:scale={scale:g}",
        eval=value,
        declared_class=FieldClass.SMOOTH,
        sup_bound=1.0,
        grad_R=lambda x: -(model.r**2) * x * value(x)[:, None] / scale**2,
        xfrak_norm=1.0 + lip,
        lipschitz_R=lip,
        metadata={"scale": scale},
    )


FIELDS: dict[str, Callable[..., ScalarField]] = {
    "const": constant_field,
    "sin": sine_field,
    "holder": holder_field,
    "ramp": ramp_field,
    "gauss": gauss_field,
}


def _parse_value(raw: str) -> Any:
    try:
        return int(raw)
    except ValueError:
        return float(raw)


def parse_field(spec: str, model: SpectralModel) -> ScalarField:
    """Build a field from "name" or "name:key=value,key=value"."""
    name, _, args = spec.partition(":")
    name = name.strip()
    if name not in FIELDS:
        raise ConfigurationError(f"unknown field {name!r}; choose from {sorted(FIELDS)}")
    kwargs: dict[str, Any] = {}
    for item in filter(None, (a.strip() for a in args.split(","))):
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigurationError(f"malformed field argument {item!r} in {spec!r}")
        try:
            kwargs[key.strip()] = _parse_value(raw.strip())
        except ValueError:
            raise ConfigurationError(f"field argument {item!r} is not numeric") from None
    try:
        return FIELDS[name](model, **kwargs)
    except TypeError as e:
        raise ConfigurationError(f"bad arguments for field {name!r}: {e}") from e


def builtin_fields(model: SpectralModel) -> dict[str, ScalarField]:
    """The certified catalog, spanning all four declared classes."""
    catalog = [
        constant_field(model, 1.0),
        sine_field(model, 1.0),
        sine_field(model, 50.0),
        holder_field(model, 0.5),
        holder_field(model, 0.25),
        ramp_field(model, 0.001),
        gauss_field(model),
    ]
    return {f.name: f for f in catalog}
