import logging
from typing import Any, Optional

import numpy as np

from spdelab.core.base import AbstractNonlinearity
from spdelab.core.errors import ConfigurationError

from .Radial import RadialDirectionNonlinearity, RadialScaledNonlinearity
from .Zero import ZeroNonlinearity

logger = logging.getLogger(__name__)

NONLINEARITIES: dict[str, type[AbstractNonlinearity]] = {
    ZeroNonlinearity.name: ZeroNonlinearity,
    RadialDirectionNonlinearity.name: RadialDirectionNonlinearity,
    RadialScaledNonlinearity.name: RadialScaledNonlinearity,
}


def build_nonlinearity(name: str, params: Optional[dict[str, Any]] = None) -> AbstractNonlinearity:
    try:
        cls = NONLINEARITIES[name]
    except KeyError:
        raise ConfigurationError(f"unknown nonlinearity {name!r}; choose from {sorted(NONLINEARITIES)}") from None
    try:
        return cls(**(params or {}))
    except TypeError as e:
        raise ConfigurationError(f"bad parameters for nonlinearity {name!r}: {e}") from e


def verify_nonlinearity(G: AbstractNonlinearity, n: int, n_points: int = 64, step: float = 1e-5, seed: int = 0) -> dict[str, float]:
    """Check the analytic derivatives of G against central differences and sample the bound M.

    Returns the worst relative finite-difference mismatch for each order and the largest
    sampled operator-norm ratio, which must stay below the declared M.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_points, n)) * rng.uniform(0.1, 3.0, (n_points, 1))
    h, k, j = (rng.standard_normal((n_points, n)) for _ in range(3))
    h, k, j = (v / np.linalg.norm(v, axis=1, keepdims=True) for v in (h, k, j))

    def mismatch(exact: np.ndarray, approx: np.ndarray) -> float:
        scale = max(float(np.max(np.abs(exact))), 1e-12)
        return float(np.max(np.abs(exact - approx))) / scale

    fd1 = (G.eval(x + step * h) - G.eval(x - step * h)) / (2.0 * step)
    fd2 = (G.d1(x + step * k, h) - G.d1(x - step * k, h)) / (2.0 * step)
    fd3 = (G.d2(x + step * j, h, k) - G.d2(x - step * j, h, k)) / (2.0 * step)
    d1, d2, d3 = G.d1(x, h), G.d2(x, h, k), G.d3(x, h, k, j)
    sampled = max(float(np.max(np.linalg.norm(d, axis=1))) for d in (d1, d2, d3))

    report = {
        "d1_mismatch": 0.0 if G.is_zero else mismatch(d1, fd1),
        "d2_mismatch": 0.0 if G.is_zero else mismatch(d2, fd2),
        "d3_mismatch": 0.0 if G.is_zero else mismatch(d3, fd3),
        "sampled_bound": sampled,
        "M": G.M,
    }
    if sampled > G.M * (1.0 + 1e-9):
        logger.warning(
            f"Sampled derivative norm {sampled:.6g} exceeds declared M={G.M:.6g}",
            extra={"handler": "verify_nonlinearity", "nonlinearity": G.name},
        )
    return report
