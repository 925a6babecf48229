"""Experiment configuration: TOML (or a previous run's JSON dump) validated into pydantic models."""

import hashlib
import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, field_validator

from spdelab.core.base import AbstractNonlinearity
from spdelab.core.errors import ConfigurationError
from spdelab.core.estimators import MCParams
from spdelab.core.nonlinearity import build_nonlinearity
from spdelab.core.spectral import SpectralModel

logger = logging.getLogger(__name__)

THREADS_ENV = "SPDELAB_THREADS"
LOG_LEVEL_ENV = "SPDELAB_LOG_LEVEL"


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelBlock(_Block):
    n: int = 8
    q_eigs: Union[str, list[float]] = "k^-2"
    beta: float = 1.0
    rho: float = 0.5
    trace_exponent: float = 0.5
    noise_scale: float = 1.0

    def build(self) -> SpectralModel:
        return SpectralModel.create_custom(
            n=self.n, q_eigs=self.q_eigs, beta=self.beta, rho=self.rho, trace_exponent=self.trace_exponent, noise_scale=self.noise_scale
        )


class NonlinearityBlock(_Block):
    name: str = "zero"
    params: dict[str, float] = Field(default_factory=dict)
    target_M: Optional[float] = None

    def build(self) -> AbstractNonlinearity:
        params = dict(self.params)
        if self.target_M is not None:
            params["target_M"] = self.target_M
        return build_nonlinearity(self.name, params)


class RunBlock(_Block):
    seed: int = Field(default=0, ge=0)
    n_paths: int = Field(default=10_000, ge=2)
    n_inner: int = Field(default=32, ge=2)
    n_inner_d3: int = Field(default=16, ge=2)
    dt: float = Field(default=1e-2, gt=0.0)
    min_steps: int = Field(default=16, ge=1)
    block_size: int = Field(default=256, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)
    t_min_d3: float = 0.02
    fast_d3: bool = False

    def mc_params(self, threads: int, **changes: Any) -> MCParams:
        fields = self.model_dump(exclude={"threads"})
        fields.update(changes)
        return MCParams(threads=threads, **fields)


# --- experiment blocks, one per kind -----------------------------------------------------

Point = Union[Literal["origin"], list[float]]
Points = Optional[list[list[float]]]


def _positive_lambda(v: float) -> float:
    if not v > 0.0:
        raise ValueError(f"lambda must be > 0: the resolvent is the Laplace transform int_0^inf e^{{-lambda s}} P(s)f ds, got {v}")
    return v


Lambda = Annotated[float, AfterValidator(_positive_lambda)]


class BoundsBlock(_Block):
    kind: Literal["bounds"] = "bounds"
    x0: Point = "origin"
    t_end: float = Field(default=2.0, gt=0.0)
    dt: float = Field(default=1e-3, gt=0.0)
    orders: list[int] = Field(default_factory=lambda: [1, 2, 3])
    tol_dt: float = 0.02
    levels: int = Field(default=3, ge=1)
    strong_order: bool = False
    nonlinearity_check: bool = True


class MartingaleBlock(_Block):
    kind: Literal["martingale"] = "martingale"
    x0: Point = "origin"
    t_end: float = Field(default=1.0, gt=0.0)
    dt: float = Field(default=1e-2, gt=0.0)
    n_sigma: float = 3.0


class BelOracleBlock(_Block):
    kind: Literal["bel-oracle"] = "bel-oracle"
    field: str = "sin:omega=1"
    x0: Point = "origin"
    times: list[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0])
    ops: list[Literal["d1", "d1_smooth", "d2", "d2_smooth", "d3"]] = Field(default_factory=lambda: ["d1", "d1_smooth", "d2", "d2_smooth", "d3"])
    n_paths_d3: Optional[int] = None
    n_sigma: float = 3.0


class DecayBlock(_Block):
    kind: Literal["decay"] = "decay"
    field: str = "ramp:width=0.001"
    order: int = Field(default=1, ge=1, le=3)
    method: Literal["oracle", "smooth", "bel"] = "bel"
    t_min: float = 1e-3
    t_max: float = 1e-1
    n_times: int = Field(default=9, ge=4)
    tolerance: float = 0.15
    n_random: int = 8
    n_directions: int = 4
    holder_alpha: Optional[float] = None
    oracle_check: bool = True


class EnvelopeBlock(_Block):
    kind: Literal["envelope"] = "envelope"
    field: str = "holder:alpha=0.5"
    eps_min: float = 1e-3
    eps_max: float = 1e-1
    n_eps: int = Field(default=5, ge=4)
    subspace_dims: int = Field(default=1, ge=1)
    grid_resolution: int = 801
    search_radius_inner: Optional[float] = None
    search_radius_outer: Optional[float] = None
    brute_force_step: float = 1e-3
    brute_force_tolerance: float = 2e-3
    tolerance: float = 0.1
    epsilon: Optional[float] = None
    x0: Point = "origin"


class InterpBlock(_Block):
    kind: Literal["interp"] = "interp"
    field: str = "holder:alpha=0.5"
    alpha: float = 0.5
    r_min_exp: int = -6
    r_max_exp: int = 0
    spread_factor: float = 3.0
    trivial_slack: float = 2.0
    subspace_dims: int = 1
    grid_resolution: int = 801


class ResolventBlock(_Block):
    kind: Literal["resolvent"] = "resolvent"
    field: str = "sin:omega=1"
    lam: Lambda = 2.0
    x0: Point = "origin"
    taus: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    n_nodes: int = 24
    n_sigma: float = 3.0
    points: Points = None


class SchauderBlock(_Block):
    kind: Literal["schauder"] = "schauder"
    field: str = "holder:alpha=0.5"
    lam: Lambda = 2.0
    alpha: Optional[float] = None
    control_alpha: Optional[float] = 0.9
    method: Literal["bel", "mehler", "oracle"] = "bel"
    n_nodes: int = 24
    finest: int = 5
    coarsest: int = 2
    factor: float = 2.0
    probe_points: Points = None


class ZygmundBlock(_Block):
    kind: Literal["zygmund"] = "zygmund"
    field: str = "ramp:width=0.001"
    lam: Lambda = 2.0
    contrast_alpha: Optional[float] = 0.99
    method: Literal["bel", "mehler", "oracle"] = "bel"
    n_nodes: int = 24
    finest: int = 5
    coarsest: int = 2
    factor: float = 2.0
    probe_points: Points = None


class EvolveBlock(_Block):
    kind: Literal["evolve"] = "evolve"
    field: str = "sin:omega=1"
    source: Optional[float] = None
    t: float = Field(default=0.5, gt=0.0)
    x0: Point = "origin"
    n_nodes: int = 16
    probe: bool = False
    probe_field: str = "holder:alpha=0.5"
    alpha: Optional[float] = None
    method: Literal["bel", "mehler", "oracle"] = "oracle"
    n_sigma: float = 3.0
    points: Points = None
    factor: float = 2.0


class SchvarBlock(_Block):
    kind: Literal["schvar"] = "schvar"
    field: str = "sin:omega=1"
    lam: Lambda = 2.0
    delta: float = 0.05
    dims: int = 2
    points: int = 17
    extent: float = 2.0
    max_iters: int = 50
    tol: float = 1e-10
    n_nodes: int = 16
    ratio_tolerance: float = 0.2


ExperimentBlock = Annotated[
    Union[
        BoundsBlock,
        MartingaleBlock,
        BelOracleBlock,
        DecayBlock,
        EnvelopeBlock,
        InterpBlock,
        ResolventBlock,
        SchauderBlock,
        ZygmundBlock,
        EvolveBlock,
        SchvarBlock,
    ],
    Field(discriminator="kind"),
]


class OutputBlock(_Block):
    directory: str = "results"
    formats: list[Literal["csv", "json", "plotdata"]] = Field(default_factory=lambda: ["csv", "json", "plotdata"])
    dump_paths: int = Field(default=0, ge=0)


class ExperimentConfig(_Block):
    name: str = "experiment"
    model: ModelBlock = Field(default_factory=ModelBlock)
    nonlinearity: NonlinearityBlock = Field(default_factory=NonlinearityBlock)
    run: RunBlock = Field(default_factory=RunBlock)
    experiment: ExperimentBlock
    output: OutputBlock = Field(default_factory=OutputBlock)

    @field_validator("name")
    @classmethod
    def _name_is_slug(cls, v: str) -> str:
        if not v or any(c in v for c in "/\\ "):
            raise ValueError("name must be a non-empty slug without spaces or slashes")
        return v

    def resolved(self) -> dict[str, Any]:
        return self.model_dump(mode="json")

    def config_hash(self) -> str:
        """SHA-256 of the canonical resolved config without output and thread settings."""
        data = self.model_dump(mode="json", exclude={"output": True, "run": {"threads"}})
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def initial_state(self, model: SpectralModel) -> np.ndarray:
        x0 = getattr(self.experiment, "x0", "origin")
        if x0 == "origin":
            return np.zeros(model.n)
        x = np.asarray(x0, dtype=float)
        if x.shape != (model.n,):
            raise ConfigurationError(f"x0 has {x.size} components, the model has n={model.n}")
        return x


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a TOML config, or the JSON dump embedded in a previous results.json."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        data = data.get("config", data)
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    config = ExperimentConfig.model_validate(data)
    logger.info(f"Loaded {config.experiment.kind} config {config.name} from {path}", extra={"handler": "load_config", "op": config.experiment.kind})
    return config


def thread_budget(cli_threads: Optional[int], config: Optional[ExperimentConfig] = None) -> int:
    """CLI flag, then SPDELAB_THREADS, then the config, then the machine's parallelism."""
    load_dotenv()
    if cli_threads is not None:
        return max(1, cli_threads)
    env = os.getenv(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if config is not None and config.run.threads is not None:
        return config.run.threads
    return os.cpu_count() or 1
