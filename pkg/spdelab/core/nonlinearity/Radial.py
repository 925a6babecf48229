import logging
from abc import abstractmethod
from typing import Optional

import numpy as np

from spdelab.core.base import AbstractNonlinearity

logger = logging.getLogger(__name__)

# squared-radius grid on which the derivative bound functions are maximised
_S_GRID = np.concatenate([np.linspace(0.0, 20.0, 20001), np.geomspace(20.0, 1.0e6, 4000)])
_SAFETY = 1.1


def _dot(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.sum(u * w, axis=-1, keepdims=True)


class _RadialNonlinearity(AbstractNonlinearity):
    """Common machinery for G built from a profile Phi of s = ||x||^2.

    The uniform bound M is the grid supremum over s of explicit triangle-inequality bounds on the
    operator norms of DG, D^2G, D^3G (they depend on x only through s), times a 1.1 safety factor.
    When `target_M` is given, the amplitude is rescaled so that M equals it.
    """

    def __init__(self, amplitude: float = 1.0, target_M: Optional[float] = None, **kwargs):
        super().__init__(amplitude=amplitude, **kwargs)
        self.amplitude = 1.0
        unit_M = self._bound_M()
        if target_M is not None:
            amplitude = target_M / unit_M if unit_M > 0 else 0.0
        self.amplitude = float(amplitude)
        self.params["amplitude"] = self.amplitude
        self.M = unit_M * abs(self.amplitude)
        logger.debug(
            f"Radial nonlinearity {self.name} ready with M={self.M:.6g}",
            extra={"handler": "RadialNonlinearity", "amplitude": self.amplitude, "M": self.M},
        )

    @abstractmethod
    def profile(self, s: np.ndarray, order: int) -> np.ndarray:
        """Phi^{(order)}(s) at unit amplitude."""
        raise NotImplementedError

    @abstractmethod
    def derivative_bounds(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _bound_M(self) -> float:
        b1, b2, b3 = self.derivative_bounds(_S_GRID)
        return _SAFETY * float(max(b1.max(), b2.max(), b3.max()))

    def _phi(self, x: np.ndarray, order: int) -> np.ndarray:
        s = np.sum(x * x, axis=-1, keepdims=True)
        return self.amplitude * self.profile(s, order)


class RadialDirectionNonlinearity(_RadialNonlinearity):
    """G(x) = Phi(||x||^2) v with a fixed unit vector v = e_index and Phi(s) = c exp(-s/2)."""

    name = "radial-direction"

    def __init__(self, amplitude: float = 1.0, target_M: Optional[float] = None, index: int = 0, **kwargs):
        self.index = int(index)
        super().__init__(amplitude=amplitude, target_M=target_M, index=index, **kwargs)

    def profile(self, s: np.ndarray, order: int) -> np.ndarray:
        return (-0.5) ** order * np.exp(-0.5 * s)

    def derivative_bounds(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p1, p2, p3 = (np.abs(self.profile(s, o)) for o in (1, 2, 3))
        root = np.sqrt(s)
        return 2.0 * p1 * root, 4.0 * p2 * s + 2.0 * p1, 8.0 * p3 * s * root + 12.0 * p2 * root

    def _along_v(self, scalar: np.ndarray, like: np.ndarray) -> np.ndarray:
        out = np.zeros(np.broadcast_shapes(scalar.shape[:-1] + (1,), like.shape))
        out[..., self.index] = scalar[..., 0]
        return out

    def eval(self, x: np.ndarray) -> np.ndarray:
        return self._along_v(self._phi(x, 0), x)

    def d1(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        return self._along_v(2.0 * self._phi(x, 1) * _dot(x, h), x)

    def d2(self, x: np.ndarray, h: np.ndarray, k: np.ndarray) -> np.ndarray:
        xh, xk = _dot(x, h), _dot(x, k)
        return self._along_v(4.0 * self._phi(x, 2) * xh * xk + 2.0 * self._phi(x, 1) * _dot(h, k), x)

    def d3(self, x: np.ndarray, h: np.ndarray, k: np.ndarray, j: np.ndarray) -> np.ndarray:
        xh, xk, xj = _dot(x, h), _dot(x, k), _dot(x, j)
        mixed = _dot(h, k) * xj + _dot(h, j) * xk + _dot(k, j) * xh
        return self._along_v(8.0 * self._phi(x, 3) * xh * xk * xj + 4.0 * self._phi(x, 2) * mixed, x)


class RadialScaledNonlinearity(_RadialNonlinearity):
    """G(x) = Phi(||x||^2) x with Phi(s) = c / (1 + s), so that Phi'(s) = O(1/s)."""

    name = "radial-scaled"

    def profile(self, s: np.ndarray, order: int) -> np.ndarray:
        coefficient = (1.0, -1.0, 2.0, -6.0)[order]
        return coefficient / (1.0 + s) ** (order + 1)

    def derivative_bounds(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p0, p1, p2, p3 = (np.abs(self.profile(s, o)) for o in range(4))
        root = np.sqrt(s)
        b1 = p0 + 2.0 * p1 * s
        b2 = 6.0 * p1 * root + 4.0 * p2 * s * root
        b3 = 6.0 * p1 + 24.0 * p2 * s + 8.0 * p3 * s * s
        return b1, b2, b3

    def eval(self, x: np.ndarray) -> np.ndarray:
        return self._phi(x, 0) * x

    def d1(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        return self._phi(x, 0) * h + 2.0 * self._phi(x, 1) * _dot(x, h) * x

    def d2(self, x: np.ndarray, h: np.ndarray, k: np.ndarray) -> np.ndarray:
        xh, xk = _dot(x, h), _dot(x, k)
        first = 2.0 * self._phi(x, 1) * (xk * h + xh * k + _dot(h, k) * x)
        return first + 4.0 * self._phi(x, 2) * xh * xk * x

    def d3(self, x: np.ndarray, h: np.ndarray, k: np.ndarray, j: np.ndarray) -> np.ndarray:
        xh, xk, xj = _dot(x, h), _dot(x, k), _dot(x, j)
        hk, hj, kj = _dot(h, k), _dot(h, j), _dot(k, j)
        first = 2.0 * self._phi(x, 1) * (kj * h + hj * k + hk * j)
        second = 4.0 * self._phi(x, 2) * (xj * xk * h + xj * xh * k + xh * xk * j + (xj * hk + hj * xk + xh * kj) * x)
        third = 8.0 * self._phi(x, 3) * xh * xk * xj * x
        return first + second + third
