import numpy as np

from spdelab.core.base import AbstractNonlinearity


class ZeroNonlinearity(AbstractNonlinearity):
    """G = 0: the Ornstein-Uhlenbeck case."""

    name = "zero"

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.M = 0.0

    @property
    def is_zero(self) -> bool:
        return True

    def eval(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)

    def d1(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        return np.zeros_like(h)

    def d2(self, x: np.ndarray, h: np.ndarray, k: np.ndarray) -> np.ndarray:
        return np.zeros_like(h)

    def d3(self, x: np.ndarray, h: np.ndarray, k: np.ndarray, j: np.ndarray) -> np.ndarray:
        return np.zeros_like(h)
