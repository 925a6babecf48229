"""Empirical Hölder, Zygmund and sup seminorms along H_R.

Every estimate is a maximum over a finite probe (points x directions x dyadic scales), so it is a
reproducible lower bound of the true supremum. Per-scale maxima are kept so that stabilisation
or divergence as the scale shrinks is visible.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy import stats

from spdelab.core.errors import ConfigurationError, ProbeError
from spdelab.core.rng import Stream, substream
from spdelab.core.spectral import SpectralModel, hr_norm

logger = logging.getLogger(__name__)

FieldLike = Callable[[np.ndarray], np.ndarray]

KINDS = ("holder", "zygmund", "sup")


def unit_hr_directions(model: SpectralModel, count: int, seed: int = 0, include_axis: bool = True) -> np.ndarray:
    """`count` unit-H_R directions; the first is r_1 e_1 when `include_axis`."""
    rng = substream(seed, int(Stream.DIRECTION), model.n)
    raw = rng.standard_normal((count, model.n)) * model.r
    dirs = raw / hr_norm(raw, model)[:, None]
    if include_axis and count:
        dirs[0] = model.unit_hr(0)
    return dirs


def ball_points(model: SpectralModel, count: int, radius: float = 2.0, seed: int = 0, include_origin: bool = True) -> np.ndarray:
    """`count` states drawn uniformly from the Euclidean ball of the given radius."""
    rng = substream(seed, int(Stream.PROBE), model.n)
    g = rng.standard_normal((count, model.n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = g * radius * rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / model.n)
    if include_origin and count:
        pts[0] = 0.0
    return pts


@dataclass
class SeminormProbe:
    probe_points: np.ndarray
    direction_set: np.ndarray
    scales: np.ndarray
    kind: str = "holder"
    alpha: Optional[float] = None

    def __post_init__(self):
        self.probe_points = np.atleast_2d(np.asarray(self.probe_points, dtype=float))
        self.direction_set = np.atleast_2d(np.asarray(self.direction_set, dtype=float))
        self.scales = np.asarray(self.scales, dtype=float)
        if self.kind not in KINDS:
            raise ConfigurationError(f"probe kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind != "sup":
            if len(self.scales) < 3:
                raise ConfigurationError("a seminorm probe needs at least 3 scales")
            if np.any(np.diff(self.scales) >= 0.0):
                raise ConfigurationError("probe scales must be strictly decreasing")
        if self.kind == "holder" and self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"Hölder probes need alpha in (0, 1), got {self.alpha}")

    @classmethod
    def create_default(cls, model: SpectralModel, kind: str = "holder", alpha: Optional[float] = None, seed: int = 0) -> "SeminormProbe":
        """16 points in the radius-2 ball (origin included), 8 directions, scales 2^-1..2^-8."""
        return cls(
            probe_points=ball_points(model, 16, 2.0, seed),
            direction_set=unit_hr_directions(model, 8, seed),
            scales=2.0 ** -np.arange(1, 9),
            kind=kind,
            alpha=alpha,
        )

    @classmethod
    def create_custom(
        cls,
        model: SpectralModel,
        n_points: int = 16,
        n_directions: int = 8,
        radius: float = 2.0,
        finest: int = 8,
        coarsest: int = 1,
        kind: str = "holder",
        alpha: Optional[float] = None,
        seed: int = 0,
        extra_points: Optional[np.ndarray] = None,
    ) -> "SeminormProbe":
        points = ball_points(model, n_points, radius, seed)
        if extra_points is not None:
            points = np.vstack([points, np.atleast_2d(extra_points)])
        return cls(
            probe_points=points,
            direction_set=unit_hr_directions(model, n_directions, seed),
            scales=2.0 ** -np.arange(coarsest, finest + 1, dtype=float),
            kind=kind,
            alpha=alpha,
        )

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "n_points": len(self.probe_points),
            "n_directions": len(self.direction_set),
            "scales": [float(s) for s in self.scales],
        }


@dataclass
class SeminormResult:
    estimate: float
    scales: np.ndarray
    per_scale: np.ndarray
    kind: str
    alpha: Optional[float] = None
    excluded: list[float] = field(default_factory=list)

    def spread(self, n_scales: int = 3) -> float:
        """max/min of the per-scale maxima over the `n_scales` finest kept scales."""
        tail = self.per_scale[-n_scales:]
        if np.max(tail) == 0.0:
            return 1.0
        if np.min(tail) == 0.0:
            return math.inf
        return float(np.max(tail) / np.min(tail))

    def stable_within(self, factor: float, n_scales: int = 3) -> bool:
        return len(self.per_scale) >= n_scales and self.spread(n_scales) <= factor

    def growth_slope(self) -> float:
        """log-log slope of the per-scale maxima against scale (negative means growth as scale -> 0)."""
        keep = self.per_scale > 0.0
        if np.count_nonzero(keep) < 2:
            return 0.0
        return float(stats.linregress(np.log(self.scales[keep]), np.log(self.per_scale[keep])).slope)

    def without(self, drop: np.ndarray) -> "SeminormResult":
        keep = ~np.asarray(drop, dtype=bool)
        return SeminormResult(
            estimate=float(np.max(self.per_scale[keep], initial=0.0)),
            scales=self.scales[keep],
            per_scale=self.per_scale[keep],
            kind=self.kind,
            alpha=self.alpha,
            excluded=self.excluded + [float(s) for s in self.scales[~keep]],
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "estimate": self.estimate,
            "scales": [float(s) for s in self.scales],
            "per_scale": [float(v) for v in self.per_scale],
            "excluded": self.excluded,
        }


def _evaluate(f_like: FieldLike, X: np.ndarray) -> np.ndarray:
    values = np.asarray(f_like(X), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ProbeError(f"non-finite evaluation on {np.count_nonzero(~np.isfinite(values))} probe states")
    return values.reshape(len(X), -1)


def shifted_states(probe: SeminormProbe, multiple: float) -> np.ndarray:
    """States x + multiple * s * u laid out as (scale, point, direction)."""
    steps = probe.scales[:, None, None, None] * probe.direction_set[None, None, :, :]
    X = probe.probe_points[None, :, None, :] + multiple * steps
    return X.reshape(-1, probe.probe_points.shape[1])


def _quotients(probe: SeminormProbe, f_like: FieldLike) -> np.ndarray:
    S, N, D = len(probe.scales), len(probe.probe_points), len(probe.direction_set)
    base = _evaluate(f_like, probe.probe_points)
    one = _evaluate(f_like, shifted_states(probe, 1.0)).reshape(S, N, D, -1)
    if probe.kind == "holder":
        diff = one - base[None, :, None, :]
        denom = probe.scales**probe.alpha
    else:
        two = _evaluate(f_like, shifted_states(probe, 2.0)).reshape(S, N, D, -1)
        diff = two - 2.0 * one + base[None, :, None, :]
        denom = probe.scales
    return np.linalg.norm(diff, axis=-1) / denom[:, None, None]


def holder_seminorm(f_like: FieldLike, alpha: float, probe: SeminormProbe) -> SeminormResult:
    """max over (point, direction, scale) of ||f(x+h) - f(x)|| / ||h||_R^alpha."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    probe = SeminormProbe(probe.probe_points, probe.direction_set, probe.scales, "holder", alpha)
    per_scale = _quotients(probe, f_like).max(axis=(1, 2))
    return SeminormResult(float(per_scale.max()), probe.scales, per_scale, "holder", alpha)


def zygmund_seminorm(f_like: FieldLike, probe: SeminormProbe) -> SeminormResult:
    """max over the probe of ||f(x+2h) - 2f(x+h) + f(x)|| / ||h||_R."""
    probe = SeminormProbe(probe.probe_points, probe.direction_set, probe.scales, "zygmund")
    per_scale = _quotients(probe, f_like).max(axis=(1, 2))
    return SeminormResult(float(per_scale.max()), probe.scales, per_scale, "zygmund")


def sup_seminorm(f_like: FieldLike, probe: SeminormProbe) -> float:
    return float(np.max(np.linalg.norm(_evaluate(f_like, probe.probe_points), axis=-1)))


# --- 1-d brute force ---------------------------------------------------------------------


def _grids(center_step: float) -> tuple[np.ndarray, np.ndarray]:
    near = np.arange(-1e-2, 1e-2 + center_step / 2, center_step)
    s = np.union1d(np.linspace(-2.0, 2.0, 4001), near)
    h = np.geomspace(center_step, 2.0, 160)
    return s, np.concatenate([-h[::-1], h])


def brute_force_holder_1d(g: Callable[[np.ndarray], np.ndarray], alpha: float, center_step: float = 1e-5) -> float:
    """sup |g(s+h) - g(s)| / |h|^alpha over a grid refined to `center_step` around 0."""
    s, h = _grids(center_step)
    best = 0.0
    for chunk in np.array_split(h, 16):
        q = np.abs(g(s[:, None] + chunk[None, :]) - g(s)[:, None]) / np.abs(chunk)[None, :] ** alpha
        best = max(best, float(q.max()))
    return best


def brute_force_zygmund_1d(g: Callable[[np.ndarray], np.ndarray], scales: np.ndarray, center_step: float = 1e-5) -> np.ndarray:
    """Per-scale sup |g(s+2h) - 2g(s+h) + g(s)| / |h| over the same grid, for h = +-scale."""
    s, _ = _grids(center_step)
    out = []
    for scale in scales:
        h = np.array([-scale, scale])
        q = np.abs(g(s[:, None] + 2 * h) - 2 * g(s[:, None] + h) + g(s)[:, None]) / scale
        out.append(float(q.max()))
    return np.array(out)
