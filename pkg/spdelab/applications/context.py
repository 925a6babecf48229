from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from spdelab.core.base import AbstractNonlinearity, ScalarField
from spdelab.core.errors import ConfigurationError
from spdelab.core.estimators import MCParams
from spdelab.core.fields.catalog import parse_field
from spdelab.core.spectral import SpectralModel, compute_constants


@dataclass
class RunContext:
    """Everything an experiment needs: the model, G, sampling parameters and its config block."""

    name: str
    block: Any
    model: SpectralModel
    G: AbstractNonlinearity
    params: MCParams
    threads: int = 1
    x0: Optional[np.ndarray] = None
    out_dir: Optional[Path] = None
    dump_paths: int = 0

    def __post_init__(self):
        if self.x0 is None:
            self.x0 = np.zeros(self.model.n)

    def field(self, spec: str) -> ScalarField:
        return parse_field(spec, self.model)

    @property
    def zeta_R(self) -> float:
        return compute_constants(self.model, self.G.M).zeta_R

    def points(self, raw: Optional[list[list[float]]]) -> list[np.ndarray]:
        """Configured extra states, each checked against the truncation dimension."""
        out = []
        for p in raw or []:
            x = np.asarray(p, dtype=float)
            if x.shape != (self.model.n,):
                raise ConfigurationError(f"point {p} has {x.size} components, the model has n={self.model.n}")
            out.append(x)
        return out

    def require_zero_nonlinearity(self, kind: str) -> None:
        if not self.G.is_zero:
            raise ConfigurationError(f"the {kind} experiment compares against Ornstein-Uhlenbeck closed forms and needs G = 0, got {self.G.name}")
