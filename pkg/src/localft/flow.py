"""Iterating the concatenation maps and locating thresholds on them.

A *map* here is any callable taking a rate vector (numpy array) to the rate
vector one level up, e.g. :func:`localft.model.nonlocal_map` or
:func:`localft.local.local_map`.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalError

log = logging.getLogger(__name__)

RateMap = Callable[[np.ndarray], np.ndarray]

BELOW_FLOOR = 1e-12
ABOVE_CEILING = 0.3
MAX_ITER = 200
DEFAULT_MAX_TAU = 16

BELOW, ABOVE, UNDECIDED = "below", "above", "undecided"


@dataclass(frozen=True)
class FlowResult:
    trajectory: np.ndarray  # (levels examined, dim); row 0 is the start
    classification: str
    iterations_used: int


@dataclass(frozen=True)
class Ray:
    """The line ``base_point + scale * direction`` through rate space."""

    base_point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base_point, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        if base.shape != direction.shape or base.ndim != 1:
            raise DomainError("ray base point and direction must be vectors of equal length")
        if not np.any(direction != 0):
            raise DomainError("ray direction is zero")
        if np.any(direction < 0) or np.any(base < 0):
            raise DomainError("ray must stay in the nonnegative orthant")
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "direction", direction)

    @classmethod
    def through(cls, direction: Sequence[float]) -> "Ray":
        return cls(np.zeros(len(direction)), np.asarray(direction, dtype=float))

    def at(self, scale: float) -> np.ndarray:
        x = self.base_point + scale * self.direction
        if np.any(x < 0) or np.any(x > 1):
            raise DomainError(f"ray point at scale {scale:g} leaves [0, 1]^{x.size}")
        return x

    def max_scale(self) -> float:
        """Largest scale keeping every component within [0, 1]."""
        pos = self.direction > 0
        return float(np.min((1.0 - self.base_point[pos]) / self.direction[pos]))


@dataclass(frozen=True)
class FixedPointReport:
    location: np.ndarray
    residual: float
    jacobian_eigenvalues: np.ndarray  # magnitudes, descending
    unstable_count: int
    jacobian: np.ndarray = field(repr=False, default=None)
    newton_steps: int = 0


@dataclass(frozen=True)
class ThresholdSearch:
    value: float
    lo: float
    hi: float
    probes: int
    undecided_probes: int

    @property
    def flagged(self) -> bool:
        return self.undecided_probes > 0


def iterate_flow(rate_map: RateMap, start, max_iter: int = MAX_ITER, floor: float = BELOW_FLOOR,
                 ceiling: float = ABOVE_CEILING) -> FlowResult:
    """Apply ``rate_map`` until the largest rate drops below ``floor`` or exceeds ``ceiling``."""
    x = np.asarray(start, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("start point must lie in [0, 1]^dim")
    traj = [x]
    verdict = UNDECIDED
    for level in range(max_iter + 1):
        top = x.max()
        if top < floor:
            verdict = BELOW
            break
        if top > ceiling:
            verdict = ABOVE
            break
        if level == max_iter:
            break
        x = rate_map(x)
        traj.append(x)
    return FlowResult(np.vstack(traj), verdict, len(traj))


def classify(rate_map: RateMap, x, max_iter: int = MAX_ITER) -> str:
    return iterate_flow(rate_map, x, max_iter).classification


def auto_bracket(ray: Ray, lo: float | None = None, hi: float | None = None) -> tuple[float, float]:
    """Default scale bracket: from 1e-7 up to where the largest component reaches 0.25."""
    top = float(np.max(ray.direction))
    hi = min(0.25 / top, ray.max_scale()) if hi is None else hi
    lo = 1e-7 if lo is None else lo
    return lo, hi


def _geo_mid(lo: float, hi: float) -> float:
    return math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)


def threshold_search(rate_map: RateMap, ray: Ray, lo: float | None = None, hi: float | None = None,
                     rel_tol: float = 1e-3, max_iter: int = MAX_ITER) -> ThresholdSearch:
    """Bisect along ``ray`` for the scale where flows switch from converging to diverging.

    Undecided flows count as above threshold, which keeps the estimate
    conservative; they are tallied in ``undecided_probes``.
    """
    lo, hi = auto_bracket(ray, lo, hi)
    if not 0 <= lo < hi:
        raise DomainError(f"invalid bracket [{lo}, {hi}]")
    undecided = 0

    def is_below(scale: float) -> bool:
        nonlocal undecided
        verdict = classify(rate_map, ray.at(scale), max_iter)
        if verdict == UNDECIDED:
            undecided += 1
            log.warning("undecided flow at scale %.6g treated as above threshold", scale)
        return verdict == BELOW

    if not is_below(lo):
        raise DomainError(f"lower bracket {lo:g} does not flow to zero")
    if is_below(hi):
        raise DomainError(f"upper bracket {hi:g} does not flow away from zero")
    probes = 2
    while hi - lo > rel_tol * hi:
        mid = _geo_mid(lo, hi)
        probes += 1
        if is_below(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdSearch(0.5 * (lo + hi), lo, hi, probes, undecided)


def bisect_threshold(rate_map: RateMap, ray: Ray, lo: float | None = None, hi: float | None = None,
                     rel_tol: float = 1e-3) -> float:
    return threshold_search(rate_map, ray, lo, hi, rel_tol).value


def jacobian(rate_map: RateMap, x, rel_step: float = 1e-4, floor: float = 1e-10,
             central: bool = False) -> np.ndarray:
    """Finite-difference Jacobian of ``rate_map`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.empty((n, n))
    f0 = None if central else rate_map(x)
    for i in range(n):
        h = max(rel_step * abs(x[i]), floor)
        e = np.zeros(n)
        e[i] = h
        if central:
            jac[:, i] = (rate_map(x + e) - rate_map(np.maximum(x - e, 0.0))) / (h + min(h, x[i]))
        else:
            jac[:, i] = (rate_map(x + e) - f0) / h
    return jac


def find_fixed_point(rate_map: RateMap, initial_guess, tol: float = 1e-12, max_steps: int = 100,
                     rel_step: float = 1e-4, floor: float = 1e-10) -> FixedPointReport:
    """Damped Newton iteration on ``rate_map(x) - x``."""
    x = np.asarray(initial_guess, dtype=float)
    n = x.size

    def residual(y):
        return rate_map(y) - y

    g = residual(x)
    res = float(np.max(np.abs(g)))
    steps = 0
    while res >= tol:
        if steps >= max_steps:
            raise NumericalError(f"Newton did not converge in {max_steps} steps (residual {res:.3g})")
        steps += 1
        jg = jacobian(rate_map, x, rel_step, floor) - np.eye(n)
        try:
            dx = np.linalg.solve(jg, -g)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Newton system") from exc
        t = 1.0
        while True:
            trial = np.clip(x + t * dx, 0.0, 1.0)
            g_trial = residual(trial)
            r_trial = float(np.max(np.abs(g_trial)))
            if r_trial < res or t < 1e-4:
                break
            t *= 0.5
        x, g, res = trial, g_trial, r_trial
    jac = jacobian(rate_map, x, rel_step, floor)
    mags = np.sort(np.abs(np.linalg.eigvals(jac)))[::-1]
    return FixedPointReport(location=x, residual=res, jacobian_eigenvalues=mags,
                            unstable_count=int(np.sum(mags > 1.0)), jacobian=jac, newton_steps=steps)


def pseudothreshold(rate_map: RateMap, ray: Ray, component: int, lo: float | None = None,
                    hi: float | None = None, rel_tol: float = 1e-3, scan_points: int = 64) -> float:
    """Scale along ``ray`` where rate ``component`` is unchanged by one map application.

    The one-step change can cross zero more than once (with a fixed wait rate
    the component first grows, then shrinks, then grows again), so the bracket
    is scanned on a geometric grid and the outermost decrease-to-increase
    crossing is refined by bisection.
    """
    lo, hi = auto_bracket(ray, lo, hi)
    if not 0 < lo < hi:
        raise DomainError(f"invalid bracket [{lo}, {hi}]")

    def change(scale: float) -> float:
        x = ray.at(scale)
        return float(rate_map(x)[component] - x[component])

    grid = np.geomspace(lo, hi, scan_points)
    values = [change(t) for t in grid]
    crossing = None
    for i in range(len(grid) - 1):
        if values[i] < 0 <= values[i + 1]:
            crossing = i
    if crossing is None:
        raise DomainError(f"no decrease-to-increase crossing of component {component} in [{lo:g}, {hi:g}]")
    lo, hi = grid[crossing], grid[crossing + 1]
    if values[crossing + 1] == 0.0:
        return float(hi)
    while hi - lo > rel_tol * hi:
        mid = _geo_mid(lo, hi)
        if change(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def one_step_decreases(rate_map: RateMap, x, components: Sequence[int] | None = None) -> bool:
    """True when every rate (or every listed component) strictly decreases after one map application."""
    x = np.asarray(x, dtype=float)
    y = rate_map(x)
    idx = slice(None) if components is None else list(components)
    return bool(np.all(y[idx] < x[idx]))


def misleading_start(rate_map: RateMap, starts, components: Sequence[int] | None = None,
                     max_iter: int = MAX_ITER):
    """First start whose rates all decrease after one level but whose flow still diverges.

    Returns ``(start, FlowResult)`` or ``None``. With ``components`` only those
    rates have to decrease (e.g. a two-dimensional projection of the flow).
    """
    for x in starts:
        x = np.asarray(x, dtype=float)
        if not one_step_decreases(rate_map, x, components):
            continue
        result = iterate_flow(rate_map, x, max_iter)
        if result.classification == ABOVE:
            return x, result
    return None


def closest_to_fixed(rate_map: RateMap, trajectory: np.ndarray) -> np.ndarray:
    """Trajectory point with the smallest relative one-step change, a natural Newton seed."""
    best, best_score = trajectory[0], math.inf
    for x in trajectory:
        if x.max() <= 0:
            continue
        score = float(np.max(np.abs(rate_map(x) - x)) / x.max())
        if score < best_score:
            best, best_score = x, score
    return best


@dataclass(frozen=True)
class TauScan:
    tau_star: int
    threshold: float
    thresholds: dict  # tau -> threshold


def optimize_tau(threshold_at: Callable[[int], float], tau_range: Sequence[int],
                 workers: int = 1) -> TauScan:
    """Scan integer tau, return the one with the largest threshold (ties go to the smaller tau)."""
    taus = sorted(set(int(t) for t in tau_range))
    if not taus:
        raise DomainError("empty tau range")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(threshold_at, taus))
    else:
        values = [threshold_at(t) for t in taus]
    table = dict(zip(taus, values))
    best = max(taus, key=lambda t: (table[t], -t))
    return TauScan(best, table[best], table)


def local_threshold(r: int, tau: int, epsilon: float = 1.0, params=None, catalog=None,
                    rel_tol: float = 1e-3) -> float:
    """gamma_2 threshold of the local map on the transport-study ray."""
    from .catalog import DEFAULT_CATALOG
    from .local import GeometryParams, initial_direction, local_map
    from .model import ProtocolParams

    geometry = GeometryParams(r, tau, epsilon)
    fn = local_map(params or ProtocolParams(), catalog or DEFAULT_CATALOG, geometry)
    return bisect_threshold(fn, Ray.through(initial_direction(geometry)), rel_tol=rel_tol)


def optimize_local_tau(r: int, epsilon: float = 1.0, tau_range: Sequence[int] | None = None,
                       params=None, catalog=None, rel_tol: float = 1e-3, workers: int = 1) -> TauScan:
    """Best in-transit correction count for scale ``r`` (tau held fixed across levels)."""
    if tau_range is None:
        tau_range = range(1, min(r, DEFAULT_MAX_TAU) + 1)
    return optimize_tau(lambda t: local_threshold(r, t, epsilon, params, catalog, rel_tol), tau_range, workers)
