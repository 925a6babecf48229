"""Exponential-Euler integration of the truncated mild equation and its variational processes.

One step of size dt advances the state by

    X <- e^{dtA} X + phi1(dt) R G(X) + e^{dtA} R dW * noise_scale

and every variational process delta by the same exact linear flow plus phi1(dt) R [DG(X) delta + forcing],
with all right-hand sides frozen at the left grid point. The stochastic weights accumulate
<delta(t_i), R dW_i>_R = sum_k delta_k dW_k / r_k with the same left-point rule, so the discrete
martingale and isometry identities hold exactly.
"""

import csv
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, TypeVar

import numpy as np
from typing_extensions import Protocol

from .base import AbstractNonlinearity
from .errors import ArgumentError, ConfigurationError, SimulationError
from .rng import Stream, path_normals
from .spectral import ModelConstants, SpectralModel, compute_constants, hr_norm, k_bounds

logger = logging.getLogger(__name__)

# delta_2 pairs carried for directions (h, k, j): (h,k), (h,j), (k,j)
PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))
UINT64_MAX = 2**64 - 1

T = TypeVar("T")


@dataclass
class SimConfig:
    """Time grid, sample size, seed and variational orders of one simulation."""

    dt: float = 1e-3
    t_end: float = 1.0
    n_paths: int = 1000
    master_seed: int = 0
    orders: tuple[int, ...] = (1,)
    directions: tuple[np.ndarray, ...] = ()
    tol_dt: float = 0.02
    block_size: int = 256
    threads: int = 1

    def __post_init__(self):
        self.orders = tuple(sorted(set(int(o) for o in self.orders)))
        self.directions = tuple(np.asarray(d, dtype=float) for d in self.directions)
        if not self.dt > 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0.0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if self.dt > self.t_end:
            raise ConfigurationError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.n_paths < 1:
            raise ConfigurationError(f"n_paths must be positive, got {self.n_paths}")
        if not 0 <= self.master_seed <= UINT64_MAX:
            raise ConfigurationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if not set(self.orders) <= {1, 2, 3}:
            raise ConfigurationError(f"orders must be a subset of {{1, 2, 3}}, got {self.orders}")
        if len(self.directions) > 3:
            raise ConfigurationError(f"at most three directions are supported, got {len(self.directions)}")
        needed = max(self.orders, default=0)
        if len(self.directions) < needed:
            raise ConfigurationError(f"order {needed} needs {needed} directions, got {len(self.directions)}")
        for i, d in enumerate(self.directions):
            if not np.any(d):
                raise ConfigurationError(f"direction {i} is zero")
        if self.block_size < 1 or self.threads < 1:
            raise ConfigurationError("block_size and threads must be positive")

    @classmethod
    def create_default(cls) -> "SimConfig":
        return cls()

    @classmethod
    def create_custom(cls, **kwargs: Any) -> "SimConfig":
        return cls(**kwargs)

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def n_steps(self) -> int:
        return steps_for(self.t_end, self.dt)

    @property
    def step(self) -> float:
        """The actual step t_end / n_steps (never larger than dt)."""
        return self.t_end / self.n_steps


def steps_for(t: float, dt: float, min_steps: int = 1) -> int:
    return max(min_steps, int(math.ceil(t / dt - 1e-9)))


@dataclass
class BatchState:
    """State of P paths at one time: X, every carried delta and every running weight.

    `delta1` has shape (P, d, n) for d directions, `weight1` shape (P, d); `delta2` and `weight2`
    are keyed by direction pairs; `isometry` is the running sum of ||delta_1^h||_R^2 dt.
    """

    t: float
    x: np.ndarray
    delta1: np.ndarray
    weight1: np.ndarray
    delta2: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    weight2: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    delta3: Optional[np.ndarray] = None
    weight3: Optional[np.ndarray] = None
    isometry: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    @classmethod
    def concat(cls, states: Sequence["BatchState"]) -> "BatchState":
        first = states[0]
        return cls(
            t=first.t,
            x=np.concatenate([s.x for s in states]),
            delta1=np.concatenate([s.delta1 for s in states]),
            weight1=np.concatenate([s.weight1 for s in states]),
            delta2={p: np.concatenate([s.delta2[p] for s in states]) for p in first.delta2},
            weight2={p: np.concatenate([s.weight2[p] for s in states]) for p in first.weight2},
            delta3=None if first.delta3 is None else np.concatenate([s.delta3 for s in states]),
            weight3=None if first.weight3 is None else np.concatenate([s.weight3 for s in states]),
            isometry=None if first.isometry is None else np.concatenate([s.isometry for s in states]),
        )


class StepObserver(Protocol):
    def __call__(self, index: int, state: BatchState) -> None: ...


def _broadcast(v: np.ndarray, P: int, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(v, dtype=float), (P, n)).copy()


def _check_finite(state: BatchState, index: int) -> None:
    arrays = [state.x, state.delta1, *state.delta2.values()]
    if state.delta3 is not None:
        arrays.append(state.delta3)
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise SimulationError(f"non-finite state at step {index} (t={state.t:.6g})", step_index=index)


def integrate(
    x0: np.ndarray,
    model: SpectralModel,
    G: AbstractNonlinearity,
    step: float,
    increments: np.ndarray,
    directions: Sequence[np.ndarray] = (),
    orders: Sequence[int] = (1,),
    observer: Optional[StepObserver] = None,
) -> BatchState:
    """Advance P paths over increments of shape (P, m, n) and return the terminal state.

    `x0` and every direction may be a single vector or one vector per path. `observer`, if given,
    sees the state at every grid time t_0..t_m.
    """
    P, m, n = increments.shape
    model.check_dim(x0, *directions)
    orders = set(orders)
    if orders and len(directions) < max(orders):
        raise ConfigurationError(f"order {max(orders)} needs {max(orders)} directions")

    E = model.exp_diag(step)
    Phi_R = model.phi1(step) * model.r
    noise = E * model.r * model.noise_scale
    inv_r = 1.0 / model.r
    zero = G.is_zero

    d = len(directions) if orders else 0
    delta1 = np.stack([_broadcast(v, P, n) for v in directions[:d]], axis=1) if d else np.zeros((P, 0, n))
    pairs = [p for p in PAIRS if p[1] < d] if 2 in orders or 3 in orders else []
    state = BatchState(
        t=0.0,
        x=_broadcast(x0, P, n),
        delta1=delta1,
        weight1=np.zeros((P, d)),
        delta2={p: np.zeros((P, n)) for p in pairs},
        weight2={p: np.zeros(P) for p in pairs},
        delta3=np.zeros((P, n)) if 3 in orders else None,
        weight3=np.zeros(P) if 3 in orders else None,
        isometry=np.zeros(P) if d else None,
    )

    for i in range(m):
        if observer is not None:
            observer(i, state)
        x = state.x
        dW = increments[:, i, :]
        scaled = dW * inv_r

        if d:
            state.weight1 += np.einsum("pdn,pn->pd", state.delta1, scaled)
            state.isometry += np.sum((state.delta1[:, 0] * inv_r) ** 2, axis=-1) * step
        for p in pairs:
            state.weight2[p] += np.sum(state.delta2[p] * scaled, axis=-1)
        if state.delta3 is not None:
            state.weight3 += np.sum(state.delta3 * scaled, axis=-1)

        if zero:
            state.delta1 = E * state.delta1
            x_next = E * x + noise * dW
        else:
            d1 = state.delta1
            new_d1 = np.stack([E * d1[:, a] + Phi_R * G.d1(x, d1[:, a]) for a in range(d)], axis=1) if d else d1
            new_d2 = {
                (a, b): E * state.delta2[(a, b)] + Phi_R * (G.d1(x, state.delta2[(a, b)]) + G.d2(x, d1[:, a], d1[:, b]))
                for (a, b) in pairs
            }
            if state.delta3 is not None:
                h, k, j = d1[:, 0], d1[:, 1], d1[:, 2]
                forcing = (
                    G.d2(x, j, state.delta2[(0, 1)])
                    + G.d2(x, state.delta2[(0, 2)], k)
                    + G.d2(x, h, state.delta2[(1, 2)])
                    + G.d3(x, h, k, j)
                )
                state.delta3 = E * state.delta3 + Phi_R * (G.d1(x, state.delta3) + forcing)
            state.delta1 = new_d1
            state.delta2 = new_d2
            x_next = E * x + Phi_R * G.eval(x) + noise * dW

        state.x = x_next
        state.t = (i + 1) * step
        _check_finite(state, i + 1)

    if observer is not None:
        observer(m, state)
    return state


def brownian_increments(master_seed: int, indices: np.ndarray, n_steps: int, n: int, step: float, *prefix: int) -> np.ndarray:
    return path_normals(master_seed, indices, n_steps, n, *prefix) * math.sqrt(step)


def coarsen(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum groups of `factor` consecutive fine increments into coarse ones."""
    P, m, n = increments.shape
    if m % factor:
        raise ArgumentError(f"{m} fine steps cannot be grouped by {factor}")
    return increments.reshape(P, m // factor, factor, n).sum(axis=2)


def map_blocks(n_items: int, block_size: int, threads: int, fn: Callable[[np.ndarray], T]) -> list[T]:
    """Apply `fn` to fixed index blocks, concurrently, returning results in block order."""
    blocks = [np.arange(start, min(start + block_size, n_items)) for start in range(0, n_items, block_size)]
    if threads <= 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def simulate_batch(x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity, *prefix: int) -> BatchState:
    """Terminal states of paths 0..n_paths-1, reassembled in path order."""

    def run(indices: np.ndarray) -> BatchState:
        dW = brownian_increments(cfg.master_seed, indices, cfg.n_steps, model.n, cfg.step, *prefix)
        return integrate(x, model, G, cfg.step, dW, cfg.directions, cfg.orders)

    return BatchState.concat(map_blocks(cfg.n_paths, cfg.block_size, cfg.threads, run))


@dataclass
class PathBundle:
    grid: np.ndarray
    x_path: np.ndarray
    model: SpectralModel
    directions: tuple[np.ndarray, ...] = ()
    delta1: Optional[np.ndarray] = None
    delta2: Optional[np.ndarray] = None
    delta3: Optional[np.ndarray] = None
    weight1: Optional[np.ndarray] = None
    weight2: Optional[np.ndarray] = None
    weight3: Optional[np.ndarray] = None
    isometry: Optional[np.ndarray] = None
    seed: tuple[int, ...] = ()

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(o for o, d in ((1, self.delta1), (2, self.delta2), (3, self.delta3)) if d is not None)


class _Recorder:
    def __init__(self):
        self.rows: list[dict[str, Any]] = []

    def __call__(self, index: int, state: BatchState) -> None:
        row: dict[str, Any] = {"t": state.t, "x": state.x[0].copy()}
        if state.delta1.shape[1]:
            row["delta1"] = state.delta1[0, 0].copy()
            row["weight1"] = float(state.weight1[0, 0])
            row["isometry"] = float(state.isometry[0])
        if (0, 1) in state.delta2:
            row["delta2"] = state.delta2[(0, 1)][0].copy()
            row["weight2"] = float(state.weight2[(0, 1)][0])
        if state.delta3 is not None:
            row["delta3"] = state.delta3[0].copy()
            row["weight3"] = float(state.weight3[0])
        self.rows.append(row)

    def column(self, key: str) -> Optional[np.ndarray]:
        if key not in self.rows[0]:
            return None
        return np.array([r[key] for r in self.rows])


def simulate_path(x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity, path_index: int) -> PathBundle:
    """One trajectory with its variational processes recorded at every grid time."""
    dW = brownian_increments(cfg.master_seed, np.array([path_index]), cfg.n_steps, model.n, cfg.step)
    recorder = _Recorder()
    integrate(x, model, G, cfg.step, dW, cfg.directions, cfg.orders, observer=recorder)
    return PathBundle(
        grid=recorder.column("t"),
        x_path=recorder.column("x"),
        model=model,
        directions=cfg.directions,
        delta1=recorder.column("delta1"),
        delta2=recorder.column("delta2"),
        delta3=recorder.column("delta3"),
        weight1=recorder.column("weight1"),
        weight2=recorder.column("weight2"),
        weight3=recorder.column("weight3"),
        isometry=recorder.column("isometry"),
        seed=(cfg.master_seed, int(Stream.PATH), int(path_index)),
    )


def dump_paths(bundles: Sequence[PathBundle], path: Path) -> Path:
    """Columnar CSV: path, t, x_1..x_n and whichever weights the bundles carry."""
    path.parent.mkdir(parents=True, exist_ok=True)
    n = bundles[0].x_path.shape[1]
    weights = [w for w in ("weight1", "weight2", "weight3") if getattr(bundles[0], w) is not None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "t", *[f"x_{k + 1}" for k in range(n)], *weights])
        for bundle in bundles:
            for i, t in enumerate(bundle.grid):
                row = [bundle.seed[-1], repr(float(t)), *[repr(float(v)) for v in bundle.x_path[i]]]
                row += [repr(float(getattr(bundle, w)[i])) for w in weights]
                writer.writerow(row)
    logger.info(f"Dumped {len(bundles)} paths to {path}", extra={"handler": "dump_paths", "n_paths": len(bundles)})
    return path


# --- pathwise H_R bounds -------------------------------------------------------------------


@dataclass
class HregViolation:
    time: float
    order: int
    ratio: float
    path_index: int = 0


@dataclass
class HregReport:
    dt: float
    tol_dt: float
    n_paths: int
    max_ratio: dict[int, float] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)
    violations: list[HregViolation] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def ok(self) -> bool:
        return self.total == 0

    def merge(self, other: "HregReport") -> "HregReport":
        for order, ratio in other.max_ratio.items():
            self.max_ratio[order] = max(self.max_ratio.get(order, 0.0), ratio)
        for order, count in other.counts.items():
            self.counts[order] = self.counts.get(order, 0) + count
        self.violations.extend(other.violations)
        self.n_paths += other.n_paths
        return self


_MAX_LISTED = 100


def bound_values(t: float, consts: ModelConstants, norms: Sequence[float]) -> dict[int, float]:
    """The (1R), (2R), (3R) majorants at time t for directions with the given H_R norms."""
    out = {1: math.exp(consts.zeta_R * t) * norms[0]}
    if t > 0.0:
        K1, K2 = k_bounds(t, consts.zeta_R)
        if len(norms) > 1:
            out[2] = consts.M2 * K1 * norms[0] * norms[1]
        if len(norms) > 2:
            out[3] = consts.M3 * K2 * norms[0] * norms[1] * norms[2]
    return out


def _ratios(norm: np.ndarray, bound: float) -> np.ndarray:
    if bound > 0.0:
        return norm / bound
    return np.where(norm > 0.0, np.inf, 0.0)


class _HregObserver:
    def __init__(self, model: SpectralModel, consts: ModelConstants, norms: Sequence[float], orders: Sequence[int], tol_dt: float, dt: float, indices: np.ndarray):
        self.model = model
        self.consts = consts
        self.norms = norms
        self.orders = orders
        self.indices = indices
        self.report = HregReport(dt=dt, tol_dt=tol_dt, n_paths=len(indices))

    def _record(self, order: int, t: float, ratios: np.ndarray) -> None:
        report = self.report
        report.max_ratio[order] = max(report.max_ratio.get(order, 0.0), float(np.max(ratios)))
        bad = np.flatnonzero(ratios > 1.0 + report.tol_dt)
        report.counts[order] = report.counts.get(order, 0) + len(bad)
        for p in bad[: max(0, _MAX_LISTED - len(report.violations))]:
            report.violations.append(HregViolation(time=t, order=order, ratio=float(ratios[p]), path_index=int(self.indices[p])))

    def __call__(self, index: int, state: BatchState) -> None:
        bounds = bound_values(state.t, self.consts, self.norms)
        if 1 in self.orders:
            self._record(1, state.t, _ratios(hr_norm(state.delta1[:, 0], self.model), bounds[1]))
        if 2 in self.orders and 2 in bounds:
            self._record(2, state.t, _ratios(hr_norm(state.delta2[(0, 1)], self.model), bounds[2]))
        if 3 in self.orders and 3 in bounds:
            self._record(3, state.t, _ratios(hr_norm(state.delta3, self.model), bounds[3]))


def check_hreg_bounds(bundle: PathBundle, consts: ModelConstants, tol_dt: float = 0.02) -> HregReport:
    """Ratios of ||delta_i(t)||_R to their majorants along one recorded path; lists those above 1 + tol_dt."""
    model = bundle.model
    norms = [float(hr_norm(v, model)) for v in bundle.directions]
    dt = float(bundle.grid[1] - bundle.grid[0]) if len(bundle.grid) > 1 else 0.0
    observer = _HregObserver(model, consts, norms, bundle.orders, tol_dt, dt, np.array([bundle.seed[-1] if bundle.seed else 0]))
    for i, t in enumerate(bundle.grid):
        delta1 = None if bundle.delta1 is None else bundle.delta1[i][None, None, :]
        state = BatchState(
            t=float(t),
            x=bundle.x_path[i][None, :],
            delta1=np.zeros((1, 0, model.n)) if delta1 is None else delta1,
            weight1=np.zeros((1, 0)),
            delta2={} if bundle.delta2 is None else {(0, 1): bundle.delta2[i][None, :]},
            delta3=None if bundle.delta3 is None else bundle.delta3[i][None, :],
        )
        observer(i, state)
    return observer.report


def _hreg_sweep(x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity, factors: Sequence[int]) -> list[HregReport]:
    """Bound sweeps at dt / f for every f in `factors`, all driven by the same Brownian paths."""
    consts = compute_constants(model, G.M)
    norms = [float(hr_norm(v, model)) for v in cfg.directions]
    finest = max(factors)
    m_fine = cfg.n_steps * finest
    step_fine = cfg.t_end / m_fine

    def run(indices: np.ndarray) -> list[HregReport]:
        fine = brownian_increments(cfg.master_seed, indices, m_fine, model.n, step_fine)
        reports = []
        for f in factors:
            step = cfg.t_end / (cfg.n_steps * f)
            observer = _HregObserver(model, consts, norms, cfg.orders, cfg.tol_dt, step, indices)
            integrate(x, model, G, step, coarsen(fine, finest // f), cfg.directions, cfg.orders, observer=observer)
            reports.append(observer.report)
        return reports

    per_block = map_blocks(cfg.n_paths, cfg.block_size, cfg.threads, run)
    merged = []
    for level, f in enumerate(factors):
        total = HregReport(dt=cfg.t_end / (cfg.n_steps * f), tol_dt=cfg.tol_dt, n_paths=0)
        for block in per_block:
            total.merge(block[level])
        merged.append(total)
    return merged


def sweep_hreg_bounds(x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity) -> HregReport:
    """check_hreg_bounds over all cfg.n_paths paths without recording them."""
    report = _hreg_sweep(x, cfg, model, G, [1])[0]
    logger.info(
        f"Bound sweep over {report.n_paths} paths: {report.total} violations, max ratios {report.max_ratio}",
        extra={"handler": "sweep_hreg_bounds", "n_paths": report.n_paths, "dt": report.dt},
    )
    return report


@dataclass
class RefinementReport:
    reports: list[HregReport]

    @property
    def counts(self) -> list[int]:
        return [r.total for r in self.reports]

    @property
    def monotone(self) -> bool:
        c = self.counts
        return all(b <= a for a, b in zip(c, c[1:]))


def refine_bounds(x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity, levels: int = 3) -> RefinementReport:
    """Bound sweeps at dt, dt/2, ..., dt/2^(levels-1) on common Brownian increments."""
    reports = _hreg_sweep(x, cfg, model, G, [2**level for level in range(levels)])
    result = RefinementReport(reports)
    logger.info(
        f"Bound refinement violation counts {result.counts} (monotone={result.monotone})",
        extra={"handler": "refine_bounds", "n_paths": cfg.n_paths},
    )
    return result


# --- diagnostics -------------------------------------------------------------------------


class _PairGap:
    """Largest distance between the two halves of a stacked batch."""

    def __init__(self, half: int):
        self.half = half
        self.gap = 0.0

    def __call__(self, index: int, state: BatchState) -> None:
        diff = state.x[: self.half] - state.x[self.half :]
        self.gap = max(self.gap, float(np.max(np.linalg.norm(diff, axis=-1))))


def lipschitz_probe(x: np.ndarray, y: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity) -> float:
    """max over paths and grid times of ||X(t,x) - X(t,y)|| / ||x - y|| under common random numbers."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    model.check_dim(x, y)
    dist = float(np.linalg.norm(x - y))
    if dist == 0.0:
        raise ArgumentError("lipschitz_probe needs x != y")

    def run(indices: np.ndarray) -> float:
        dW = brownian_increments(cfg.master_seed, indices, cfg.n_steps, model.n, cfg.step)
        P = len(indices)
        starts = np.concatenate([np.broadcast_to(x, (P, model.n)), np.broadcast_to(y, (P, model.n))])
        observer = _PairGap(P)
        integrate(starts, model, G, cfg.step, np.concatenate([dW, dW]), orders=(), observer=observer)
        return observer.gap

    return max(map_blocks(cfg.n_paths, cfg.block_size, cfg.threads, run)) / dist


@dataclass
class MartingaleReport:
    n_paths: int
    mean_weight1: float
    se_weight1: float
    isometry_gap: float
    se_gap: float

    @property
    def martingale_ok(self) -> bool:
        return abs(self.mean_weight1) <= 3.0 * self.se_weight1

    @property
    def isometry_ok(self) -> bool:
        return abs(self.isometry_gap) <= 3.0 * self.se_gap


def martingale_check(x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity) -> MartingaleReport:
    """Sample mean of weight1(t_end) and of weight1^2 - sum ||delta_1||_R^2 dt, both with standard errors."""
    if 1 not in cfg.orders:
        raise ConfigurationError("martingale_check needs order 1 and a direction")
    state = simulate_batch(x, cfg.replace(orders=(1,), directions=cfg.directions[:1]), model, G)
    w = state.weight1[:, 0]
    gap = w**2 - state.isometry
    N = len(w)
    report = MartingaleReport(
        n_paths=N,
        mean_weight1=float(np.mean(w)),
        se_weight1=float(np.std(w, ddof=1) / math.sqrt(N)),
        isometry_gap=float(np.mean(gap)),
        se_gap=float(np.std(gap, ddof=1) / math.sqrt(N)),
    )
    logger.info(
        f"Martingale check: mean w1={report.mean_weight1:.4g}±{report.se_weight1:.2g}, isometry gap={report.isometry_gap:.4g}±{report.se_gap:.2g}",
        extra={"handler": "martingale_check", "n_paths": N},
    )
    return report


@dataclass
class StrongOrderReport:
    dts: list[float]
    errors: list[float]
    reference_dt: float

    @property
    def reduction(self) -> float:
        return self.errors[0] / self.errors[1]


def strong_order_study(
    x: np.ndarray, cfg: SimConfig, model: SpectralModel, G: AbstractNonlinearity, reference_factor: int = 16
) -> StrongOrderReport:
    """RMS error of X(t_end) at dt and dt/2 against a dt/reference_factor solution on the same increments.

    With a reference only four times finer the error ratio of a first-order scheme tends to
    sqrt(7) rather than 2, so the default reference is sixteen times finer.
    """
    if reference_factor < 4 or reference_factor & (reference_factor - 1):
        raise ArgumentError(f"reference_factor must be a power of two >= 4, got {reference_factor}")
    m_fine = cfg.n_steps * reference_factor
    step_fine = cfg.t_end / m_fine

    def run(indices: np.ndarray) -> np.ndarray:
        fine = brownian_increments(cfg.master_seed, indices, m_fine, model.n, step_fine)
        ref = integrate(x, model, G, step_fine, fine, orders=()).x
        sq = []
        for f in (1, 2):
            coarse = coarsen(fine, reference_factor // f)
            X = integrate(x, model, G, cfg.t_end / (cfg.n_steps * f), coarse, orders=()).x
            sq.append(np.sum((X - ref) ** 2, axis=-1))
        return np.stack(sq, axis=1)

    sq = np.concatenate(map_blocks(cfg.n_paths, cfg.block_size, cfg.threads, run))
    errors = [float(v) for v in np.sqrt(np.mean(sq, axis=0))]
    report = StrongOrderReport(dts=[cfg.step, cfg.step / 2], errors=errors, reference_dt=step_fine)
    logger.info(
        f"Strong error {errors[0]:.3g} -> {errors[1]:.3g} (reduction {report.reduction:.3f})",
        extra={"handler": "strong_order_study", "n_paths": cfg.n_paths},
    )
    return report
