"""Lasry-Lions sup-inf regularisation along H_R and the K-functional built on it.

    f_eps(x) = sup_h { inf_k [ f(x + h - k) + ||k||_R^2 / (2 eps) ] - ||h||_R^2 / eps }

h and k range over the span of the first `subspace_dims` frame vectors r_i e_i, written in
H_R-orthonormal coordinates u so that ||h||_R = ||u||. The inner problem is a Moreau-type
envelope; it and the outer supremum are solved by a grid search refined with scipy.optimize
(grid in dimension <= 2, multistart Powell above).
"""

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .base import FieldClass, RateFit, ScalarField
from .errors import ArgumentError, ConfigurationError, FitError
from .rates import fit_loglog
from .spectral import SpectralModel

logger = logging.getLogger(__name__)

RADIUS_SAFETY = 2.0


@dataclass
class EnvelopeConfig:
    epsilon: float
    search_radius_inner: Optional[float] = None
    search_radius_outer: Optional[float] = None
    optimizer: str = "grid"
    grid_resolution: int = 2001
    max_iters: int = 2000
    tol: float = 1e-10
    n_starts: int = 4
    subspace_dims: int = 1
    c_alpha: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if self.optimizer not in ("grid", "descent"):
            raise ConfigurationError(f"optimizer must be 'grid' or 'descent', got {self.optimizer!r}")
        if self.subspace_dims < 1:
            raise ConfigurationError("subspace_dims must be at least 1")
        for radius in (self.search_radius_inner, self.search_radius_outer):
            if radius is not None and radius <= 0.0:
                raise ConfigurationError("search radii must be positive")

    @classmethod
    def create_default(cls, model: SpectralModel, epsilon: float) -> "EnvelopeConfig":
        """Radii from the localisation bounds, subspace min(n, 4), grid search when that is <= 2."""
        dims = min(model.n, 4)
        return cls(epsilon=epsilon, subspace_dims=dims, optimizer="grid" if dims <= 2 else "descent")

    @classmethod
    def create_custom(cls, **kwargs: Any) -> "EnvelopeConfig":
        return cls(**kwargs)

    def replace(self, **changes: Any) -> "EnvelopeConfig":
        return dataclasses.replace(self, **changes)


def _holder_data(f: ScalarField) -> Optional[tuple[float, float]]:
    if f.alpha is not None and f.holder_seminorm is not None:
        return f.alpha, f.holder_seminorm
    if f.lipschitz_R is not None and f.declared_class is not FieldClass.BUC:
        return 1.0, f.lipschitz_R
    return None


def length_scale(f: ScalarField, epsilon: float) -> float:
    """([f]_alpha eps)^{1/(2-alpha)}, the scale on which f_eps differs from f."""
    data = _holder_data(f)
    if data is None or data[1] == 0.0:
        return math.sqrt(epsilon * max(f.sup_bound or 1.0, 1e-12))
    alpha, semi = data
    return (semi * epsilon) ** (1.0 / (2.0 - alpha))


def localization_radii(f: ScalarField, epsilon: float, c_alpha: float = 1.0) -> tuple[float, float]:
    """Upper bounds on ||k*||_R and ||h*||_R.

    From the sup bound: ||k*||^2 <= 4 eps ||f||, ||h*||^2 <= 2 eps ||f||. From the Hölder seminorm:
    ||k*||^2 <= (2-a) a^{a/(2-a)} 2^{2/(2-a)} [f]^{2/(2-a)} eps^{2/(2-a)} and
    ||h*||^2 <= 2 c_a [f]^{2/(2-a)} eps^{2/(2-a)}. The smaller of each pair is returned.
    """
    if f.sup_bound is None:
        raise ConfigurationError(f"ll_regularize needs a bounded field; {f.name} declares no sup bound")
    k2 = 4.0 * epsilon * f.sup_bound
    h2 = 2.0 * epsilon * f.sup_bound
    data = _holder_data(f)
    if data is not None:
        a, semi = data
        p = 2.0 / (2.0 - a)
        k2 = min(k2, (2.0 - a) * a ** (a / (2.0 - a)) * 2.0**p * semi**p * epsilon**p)
        h2 = min(h2, 2.0 * c_alpha * semi**p * epsilon**p)
    return math.sqrt(k2), math.sqrt(h2)


@dataclass
class EnvelopeResult:
    value: float
    h_star: np.ndarray
    k_star: np.ndarray
    boundary_hit: bool = False
    radii: tuple[float, float] = (0.0, 0.0)
    warnings: list[str] = field(default_factory=list)


class _Envelope:
    """f_eps at one point x over a fixed subspace."""

    def __init__(self, f: ScalarField, x: np.ndarray, cfg: EnvelopeConfig, model: SpectralModel, radii: tuple[float, float]):
        self.f = f
        self.x = np.asarray(x, dtype=float)
        self.eps = cfg.epsilon
        self.cfg = cfg
        self.d = min(cfg.subspace_dims, model.n)
        self.basis = np.stack([model.unit_hr(i) for i in range(self.d)])
        self.r_inner, self.r_outer = radii

    def f_at(self, U: np.ndarray) -> np.ndarray:
        return np.asarray(self.f.eval(self.x + U @ self.basis), dtype=float)

    def _grid(self, radius: float, resolution: int) -> np.ndarray:
        axis = np.linspace(-radius, radius, resolution)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _resolution(self) -> int:
        return self.cfg.grid_resolution if self.d == 1 else max(11, int(round(self.cfg.grid_resolution ** (1.0 / self.d))) | 1)

    # inner problem

    def inner_objective(self, u_h: np.ndarray, u_k: np.ndarray) -> float:
        return float(self.f_at((u_h - u_k)[None, :])[0] + 0.5 * u_k @ u_k / self.eps)

    def inner(self, u_h: np.ndarray, ks: np.ndarray, k_step: float) -> tuple[float, np.ndarray]:
        values = self.f_at(u_h[None, :] - ks) + 0.5 * np.sum(ks * ks, axis=1) / self.eps
        best = int(np.argmin(values))
        u_k = ks[best]
        if self.d == 1:
            res = optimize.minimize_scalar(
                lambda s: self.inner_objective(u_h, np.array([s])),
                bounds=(max(u_k[0] - k_step, -self.r_inner), min(u_k[0] + k_step, self.r_inner)),
                method="bounded",
                options={"xatol": self.cfg.tol},
            )
            candidate = np.array([res.x])
        else:
            res = optimize.minimize(
                lambda v: self.inner_objective(u_h, v),
                u_k,
                method="Powell",
                bounds=[(-self.r_inner, self.r_inner)] * self.d,
                options={"xtol": self.cfg.tol, "ftol": self.cfg.tol, "maxiter": self.cfg.max_iters},
            )
            candidate = np.asarray(res.x)
        refined = self.inner_objective(u_h, candidate)
        if refined <= values[best]:
            return refined, candidate
        return float(values[best]), u_k

    # outer problem

    def outer_objective(self, u_h: np.ndarray, ks: np.ndarray, k_step: float) -> float:
        return self.inner(u_h, ks, k_step)[0] - u_h @ u_h / self.eps

    def solve(self) -> EnvelopeResult:
        if self.f.is_constant:
            zero = np.zeros(self.d)
            return EnvelopeResult(float(self.f.constant), zero, zero.copy(), radii=(self.r_inner, self.r_outer))
        if self.cfg.optimizer == "grid" and self.d <= 2:
            return self._solve_grid()
        return self._solve_descent()

    def _solve_grid(self) -> EnvelopeResult:
        N = self._resolution()
        hs = self._grid(self.r_outer, N)
        ks = self._grid(self.r_inner, N)
        h_step = 2.0 * self.r_outer / (N - 1)
        k_step = 2.0 * self.r_inner / (N - 1)
        chunk = max(1, 4_000_000 // len(ks))
        inner = np.empty(len(hs))
        argk = np.empty(len(hs), dtype=int)
        k_pen = 0.5 * np.sum(ks * ks, axis=1) / self.eps
        for start in range(0, len(hs), chunk):
            block = hs[start : start + chunk]
            U = (block[:, None, :] - ks[None, :, :]).reshape(-1, self.d)
            vals = self.f_at(U).reshape(len(block), len(ks)) + k_pen[None, :]
            argk[start : start + chunk] = np.argmin(vals, axis=1)
            inner[start : start + chunk] = vals[np.arange(len(block)), argk[start : start + chunk]]
        outer = inner - np.sum(hs * hs, axis=1) / self.eps
        # ties go to the smallest |h|
        top = np.flatnonzero(outer >= outer.max() - 1e-14)
        best = int(top[np.argmin(np.sum(hs[top] ** 2, axis=1))])
        u_h = hs[best]

        if self.d == 1:
            res = optimize.minimize_scalar(
                lambda s: -self.outer_objective(np.array([s]), ks, k_step),
                bounds=(max(u_h[0] - h_step, -self.r_outer), min(u_h[0] + h_step, self.r_outer)),
                method="bounded",
                options={"xatol": self.cfg.tol},
            )
            candidate = np.array([res.x])
        else:
            res = optimize.minimize(
                lambda v: -self.outer_objective(v, ks, k_step),
                u_h,
                method="Powell",
                bounds=[(-self.r_outer, self.r_outer)] * self.d,
                options={"xtol": self.cfg.tol, "ftol": self.cfg.tol, "maxiter": self.cfg.max_iters},
            )
            candidate = np.asarray(res.x)
        value_c, u_k_c = self.inner(candidate, ks, k_step)
        value_c -= candidate @ candidate / self.eps
        value_g, u_k_g = self.inner(u_h, ks, k_step)
        value_g -= u_h @ u_h / self.eps
        if value_c >= value_g:
            value, u_h, u_k = value_c, candidate, u_k_c
        else:
            value, u_k = value_g, u_k_g
        boundary = bool(np.max(np.abs(u_h)) >= self.r_outer - h_step or np.max(np.abs(u_k)) >= self.r_inner - k_step)
        return self._result(value, u_h, u_k, boundary)

    def _solve_descent(self) -> EnvelopeResult:
        coarse = np.linspace(-self.r_inner, self.r_inner, 9)
        ks = np.stack(np.meshgrid(*([coarse] * min(self.d, 2)), indexing="ij"), -1).reshape(-1, min(self.d, 2))
        ks = np.hstack([ks, np.zeros((len(ks), self.d - ks.shape[1]))])
        k_step = coarse[1] - coarse[0]

        rng = np.random.default_rng(0)
        starts = [np.zeros(self.d)] + [rng.uniform(-0.5, 0.5, self.d) * self.r_outer for _ in range(self.cfg.n_starts - 1)]
        best_value, best_h = -math.inf, np.zeros(self.d)
        for start in starts:
            res = optimize.minimize(
                lambda v: -self.outer_objective(v, ks, k_step),
                start,
                method="Powell",
                bounds=[(-self.r_outer, self.r_outer)] * self.d,
                options={"xtol": 1e-8, "ftol": 1e-10, "maxiter": self.cfg.max_iters},
            )
            value = -float(res.fun)
            if value > best_value + 1e-12 or (abs(value - best_value) <= 1e-12 and res.x @ res.x < best_h @ best_h):
                best_value, best_h = value, np.asarray(res.x)
        _, u_k = self.inner(best_h, ks, k_step)
        margin = 1e-3 * self.r_outer
        boundary = bool(np.max(np.abs(best_h)) >= self.r_outer - margin or np.max(np.abs(u_k)) >= self.r_inner - 1e-3 * self.r_inner)
        return self._result(best_value, best_h, u_k, boundary)

    def _result(self, value: float, u_h: np.ndarray, u_k: np.ndarray, boundary: bool) -> EnvelopeResult:
        result = EnvelopeResult(
            value=float(value),
            h_star=u_h @ self.basis,
            k_star=u_k @ self.basis,
            boundary_hit=boundary,
            radii=(self.r_inner, self.r_outer),
        )
        if boundary:
            message = f"envelope optimum of {self.f.name} at x={self.x[: self.d]} touches the search boundary; radii too small"
            result.warnings.append(message)
            logger.warning(message, extra={"handler": "ll_regularize", "epsilon": self.eps})
        return result


def search_radii(f: ScalarField, cfg: EnvelopeConfig) -> tuple[float, float]:
    k_bound, h_bound = localization_radii(f, cfg.epsilon, cfg.c_alpha)
    inner = cfg.search_radius_inner if cfg.search_radius_inner is not None else RADIUS_SAFETY * k_bound
    outer = cfg.search_radius_outer if cfg.search_radius_outer is not None else RADIUS_SAFETY * h_bound
    if inner < k_bound or outer < h_bound:
        logger.warning(
            f"search radii ({inner:.3g}, {outer:.3g}) are below the localisation bounds ({k_bound:.3g}, {h_bound:.3g})",
            extra={"handler": "ll_regularize", "epsilon": cfg.epsilon},
        )
    return inner, outer


def ll_regularize(f: ScalarField, x: np.ndarray, cfg: EnvelopeConfig, model: SpectralModel) -> EnvelopeResult:
    """f_eps(x) with its argmax h* and argmin k*; -||f|| <= f_eps(x) <= f(x)."""
    x = np.asarray(x, dtype=float)
    model.check_dim(x)
    if cfg.subspace_dims > model.n:
        raise ConfigurationError(f"subspace_dims={cfg.subspace_dims} exceeds n={model.n}")
    return _Envelope(f, x, cfg, model, search_radii(f, cfg)).solve()


def brute_force_envelope_1d(profile: Callable[[np.ndarray], np.ndarray], epsilon: float, radii: tuple[float, float], step: float = 1e-3) -> float:
    """sup_h inf_k profile(h - k) + k^2/(2 eps) - h^2/eps on uniform grids, without refinement.

    `profile(s)` is f(x + s r_1 e_1); h and k are H_R coordinates along r_1 e_1.
    """
    r_inner, r_outer = radii
    # both grids on one lattice through 0, so h - k = 0 is attainable
    hs = step * np.arange(-math.ceil(r_outer / step), math.ceil(r_outer / step) + 1)
    ks = step * np.arange(-math.ceil(r_inner / step), math.ceil(r_inner / step) + 1)
    k_pen = 0.5 * ks * ks / epsilon
    best = -math.inf
    for start in range(0, len(hs), 512):
        block = hs[start : start + 512]
        values = np.asarray(profile((block[:, None] - ks[None, :]).ravel()), dtype=float).reshape(len(block), len(ks))
        best = max(best, float(np.max(np.min(values + k_pen[None, :], axis=1) - block * block / epsilon)))
    return best


def ll_values(f: ScalarField, points: np.ndarray, cfg: EnvelopeConfig, model: SpectralModel) -> list[EnvelopeResult]:
    """ll_regularize at many points, concurrently, in point order."""
    radii = search_radii(f, cfg)

    def solve(x: np.ndarray) -> EnvelopeResult:
        return _Envelope(f, x, cfg, model, radii).solve()

    if cfg.threads <= 1:
        return [solve(x) for x in points]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(solve, points))


def envelope_gradient(f: ScalarField, points: np.ndarray, cfg: EnvelopeConfig, model: SpectralModel, step: Optional[float] = None) -> np.ndarray:
    """Central-difference H_R-gradient of f_eps in the frame r_i e_i, shape (len(points), dims)."""
    d = min(cfg.subspace_dims, model.n)
    step = 0.1 * length_scale(f, cfg.epsilon) if step is None else step
    shifted = []
    for x in points:
        for i in range(d):
            e = model.unit_hr(i) * step
            shifted.extend([x + e, x - e])
    values = np.array([r.value for r in ll_values(f, np.array(shifted), cfg, model)]).reshape(len(points), d, 2)
    return (values[:, :, 0] - values[:, :, 1]) / (2.0 * step)


def scale_adapted_points(f: ScalarField, epsilon: float, model: SpectralModel, base: Optional[np.ndarray] = None) -> np.ndarray:
    """The origin, c * l * r_1 e_1 for c in {1/4, 1/2, 1, 2} with l the regularisation length, and `base`."""
    ell = length_scale(f, epsilon)
    pts = [np.zeros(model.n)] + [c * ell * model.unit_hr(0) for c in (0.25, 0.5, 1.0, 2.0)]
    if base is not None:
        pts.extend(np.atleast_2d(base))
    return np.array(pts)


@dataclass
class LLReport:
    epsilons: list[float]
    errors: list[float]
    gradients: list[float]
    sup_norms: list[float]
    nonnegative: bool
    bounded: bool
    degenerate: bool = False
    error_fit: Optional[RateFit] = None
    gradient_fit: Optional[RateFit] = None
    c_alpha: Optional[float] = None
    lipschitz_spread: Optional[float] = None
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        return {
            "epsilons": self.epsilons,
            "errors": self.errors,
            "gradients": self.gradients,
            "sup_norms": self.sup_norms,
            "nonnegative": self.nonnegative,
            "bounded": self.bounded,
            "degenerate": self.degenerate,
            "error_fit": None if self.error_fit is None else self.error_fit.as_dict(),
            "gradient_fit": None if self.gradient_fit is None else self.gradient_fit.as_dict(),
            "c_alpha": self.c_alpha,
            "lipschitz_spread": self.lipschitz_spread,
            "warnings": self.warnings,
        }


def gradient_lipschitz_spread(f: ScalarField, x: np.ndarray, cfg: EnvelopeConfig, model: SpectralModel, scales: Sequence[float]) -> float:
    """max/min over dyadic scales of ||grad f_eps(x + s u) - grad f_eps(x)|| / s along u = r_1 e_1."""
    u = model.unit_hr(0)
    pts = np.array([x] + [x + s * u for s in scales])
    grads = envelope_gradient(f, pts, cfg, model)
    quotients = np.linalg.norm(grads[1:] - grads[0], axis=1) / np.asarray(scales)
    if np.min(quotients) == 0.0:
        return 1.0 if np.max(quotients) == 0.0 else math.inf
    return float(np.max(quotients) / np.min(quotients))


def verify_ll_bounds(
    f: ScalarField, epsilon_grid: Sequence[float], model: SpectralModel, base_cfg: Optional[EnvelopeConfig] = None, probe_points: Optional[np.ndarray] = None
) -> LLReport:
    """Check 0 <= f - f_eps and ||f_eps|| <= ||f|| on probes; fit the error and gradient exponents.

    Targets are alpha/(2-alpha) for sup(f - f_eps) and (alpha-1)/(2-alpha) for sup ||grad f_eps||.
    The fitted c_alpha is the largest ratio of the error to [f]^{2/(2-alpha)} eps^{alpha/(2-alpha)}.
    """
    if f.sup_bound is None:
        raise ConfigurationError(f"verify_ll_bounds needs a bounded field; {f.name} declares no sup bound")
    base_cfg = base_cfg or EnvelopeConfig(epsilon=float(epsilon_grid[0]))
    errors, gradients, sups = [], [], []
    nonnegative, bounded = True, True
    warnings: list[str] = []
    tol = 1e-9
    for eps in epsilon_grid:
        cfg = base_cfg.replace(epsilon=float(eps))
        pts = scale_adapted_points(f, eps, model, probe_points)
        results = ll_values(f, pts, cfg, model)
        values = np.array([r.value for r in results])
        fx = np.asarray(f.eval(pts), dtype=float)
        warnings.extend(w for r in results for w in r.warnings)
        gap = fx - values
        nonnegative &= bool(np.all(gap >= -tol))
        bounded &= bool(np.max(np.abs(values)) <= f.sup_bound + tol)
        errors.append(float(np.max(gap)))
        sups.append(float(np.max(np.abs(values))))
        gradients.append(float(np.max(np.linalg.norm(envelope_gradient(f, pts, cfg, model), axis=1))))
        logger.debug(f"eps={eps:.3g}: sup(f - f_eps)={errors[-1]:.4g}, sup|grad|={gradients[-1]:.4g}", extra={"handler": "verify_ll_bounds"})

    report = LLReport(
        epsilons=[float(e) for e in epsilon_grid],
        errors=errors,
        gradients=gradients,
        sup_norms=sups,
        nonnegative=nonnegative,
        bounded=bounded,
        warnings=warnings,
    )
    if f.is_constant or max(errors) <= tol:
        report.degenerate = True
        logger.info(f"Regularisation of {f.name} is exact; exponent fits skipped", extra={"handler": "verify_ll_bounds"})
        return report

    try:
        report.error_fit = fit_loglog(epsilon_grid, errors, label=f"ll-error[{f.name}]")
        report.gradient_fit = fit_loglog(epsilon_grid, gradients, label=f"ll-gradient[{f.name}]")
    except FitError as e:
        report.warnings.append(str(e))
    data = _holder_data(f)
    if data is not None and data[1] > 0.0:
        a, semi = data
        if report.error_fit is not None:
            report.error_fit.metadata["expected"] = a / (2.0 - a)
        if report.gradient_fit is not None:
            report.gradient_fit.metadata["expected"] = (a - 1.0) / (2.0 - a)
        ratios = [err / (semi ** (2.0 / (2.0 - a)) * eps ** (a / (2.0 - a))) for err, eps in zip(errors, epsilon_grid)]
        report.c_alpha = float(max(ratios))
        mid = float(epsilon_grid[len(epsilon_grid) // 2])
        ell = length_scale(f, mid)
        report.lipschitz_spread = gradient_lipschitz_spread(
            f, 4.0 * ell * model.unit_hr(0), base_cfg.replace(epsilon=mid), model, [ell * 2.0**-j for j in range(2, 5)]
        )
    return report


# --- K-functional ------------------------------------------------------------------------


@dataclass
class KBound:
    r: float
    bound: float
    decomposition: float
    trivial_sup: float
    trivial_xfrak: Optional[float]
    parts: dict[str, float] = field(default_factory=dict)

    @property
    def trivial(self) -> float:
        """The better of the splits (f, 0) and (0, f)."""
        return min(self.trivial_sup, self.trivial_xfrak if self.trivial_xfrak is not None else math.inf)


def k_functional(
    f: ScalarField, r: float, alpha: float, model: SpectralModel, base_cfg: Optional[EnvelopeConfig] = None, probe_points: Optional[np.ndarray] = None
) -> KBound:
    """Upper bound on K(r, f) = inf ||a|| + r ||b||_𝔛 over splits f = a + b.

    The constructive split is a = f - f_eps, b = f_eps with eps = r^{2-alpha}; the two trivial
    splits (f, 0) and (0, f) are also considered and the smallest bound is returned.
    """
    if r <= 0.0:
        raise ArgumentError(f"k_functional needs r > 0, got {r}")
    if f.sup_bound is None:
        raise ConfigurationError(f"k_functional needs a bounded field; {f.name} declares no sup bound")
    eps = r ** (2.0 - alpha)
    cfg = (base_cfg or EnvelopeConfig(epsilon=eps)).replace(epsilon=eps)
    pts = scale_adapted_points(f, eps, model, probe_points)
    values = np.array([res.value for res in ll_values(f, pts, cfg, model)])
    fx = np.asarray(f.eval(pts), dtype=float)
    gap = float(np.max(np.abs(fx - values)))
    sup_eps = float(np.max(np.abs(values)))
    grad = float(np.max(np.linalg.norm(envelope_gradient(f, pts, cfg, model), axis=1)))
    decomposition = gap + r * (sup_eps + grad)
    trivial_sup = f.sup_bound
    trivial_xfrak = None if f.xfrak_norm is None else r * f.xfrak_norm
    trivial = min(trivial_sup, trivial_xfrak if trivial_xfrak is not None else math.inf)
    return KBound(
        r=r,
        bound=min(decomposition, trivial),
        decomposition=decomposition,
        trivial_sup=trivial_sup,
        trivial_xfrak=trivial_xfrak,
        parts={"approximation": gap, "sup": sup_eps, "gradient": grad},
    )


@dataclass
class InterpolationProbe:
    alpha: float
    bounds: list[KBound]

    @property
    def weighted(self) -> list[float]:
        """r^{-alpha} times the constructive split, before the trivial splits are applied."""
        return [b.r ** -self.alpha * b.decomposition for b in self.bounds]

    @property
    def norm(self) -> float:
        """max over the r-grid of r^{-alpha} times the constructive split."""
        return float(max(self.weighted))

    @property
    def spread(self) -> float:
        w = self.weighted
        return float(max(w) / min(w)) if min(w) > 0.0 else math.inf

    @property
    def excess_over_trivial(self) -> float:
        """Largest amount by which the constructive split loses to a trivial one."""
        return float(max(b.decomposition - b.trivial for b in self.bounds))


def interpolation_norm_probe(
    f: ScalarField, alpha: float, r_grid: Sequence[float], model: SpectralModel, base_cfg: Optional[EnvelopeConfig] = None
) -> InterpolationProbe:
    probe = InterpolationProbe(alpha=alpha, bounds=[k_functional(f, float(r), alpha, model, base_cfg) for r in r_grid])
    logger.info(
        f"Interpolation probe for {f.name}: norm {probe.norm:.4g}, spread {probe.spread:.3g}",
        extra={"handler": "interpolation_norm_probe", "alpha": alpha},
    )
    return probe
