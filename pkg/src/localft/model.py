"""Nonlocal [[7,1,3]] concatenation map.

The public functions here are written for readability and mirror the
fault-source bookkeeping row by row. :func:`step_map_nonlocal` and
:func:`nonlocal_map` run the compiled kernels in :mod:`localft._kernels`,
which the test suite checks against these reference functions.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import astuple, dataclass, fields
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels as K
from .catalog import DEFAULT_CATALOG, LOCATION_TYPES, SOURCE_COEFFICIENTS, CircuitCatalog
from .errors import DomainError, NumericalError

BETA_TOL = 1e-12
BETA_MAX_ITER = 1000
CLAMP_WARN = 1e-3

NONLOCAL_LOCATIONS = ("1", "2", "w", "1m", "p")


class ClampWarning(RuntimeWarning):
    """A probability expression exceeded 1 by more than ``CLAMP_WARN`` and was clamped."""


def check_probability(x: float, name: str = "probability") -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return x


@dataclass(frozen=True)
class NonlocalRates:
    gamma_1: float
    gamma_2: float
    gamma_w: float
    gamma_1m: float
    gamma_p: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, check_probability(getattr(self, f.name), f.name))

    @classmethod
    def standard(cls, gamma_1: float, gamma_2: float | None = None, gamma_w: float = 0.0,
                 gamma_p: float | None = None) -> "NonlocalRates":
        """Base-level rates with measurement failing like a one-qubit gate, so gamma_1m = 2 gamma_1."""
        gamma_2 = gamma_1 if gamma_2 is None else gamma_2
        gamma_p = gamma_1 if gamma_p is None else gamma_p
        return cls(gamma_1, gamma_2, gamma_w, min(2.0 * gamma_1, 1.0), gamma_p)

    @classmethod
    def from_array(cls, x) -> "NonlocalRates":
        x = np.asarray(x, dtype=float)
        if x.shape != (5,):
            raise DomainError(f"expected 5 nonlocal rates, got shape {x.shape}")
        return cls(*x.tolist())

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def rate(self, location: str) -> float:
        try:
            return self.as_array()[NONLOCAL_LOCATIONS.index(location)]
        except ValueError:
            raise DomainError(f"unknown nonlocal location type {location!r}") from None


@dataclass(frozen=True)
class ProtocolParams:
    s: int = 3
    s_prime: int = 2
    gamma_ws: float = 0.0

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise DomainError(f"s must be a positive integer, got {self.s}")
        if int(self.s_prime) != self.s_prime or not 1 <= self.s_prime <= self.s:
            raise DomainError(f"s_prime must satisfy 1 <= s_prime <= s, got {self.s_prime}")
        check_probability(self.gamma_ws, "gamma_ws")

    def n_rep(self, alpha: float) -> int:
        from .catalog import n_rep
        return n_rep(self.s, alpha)


@dataclass(frozen=True)
class SyndromeCounts:
    s_x: int
    s_z: int

    def check(self, s: int) -> "SyndromeCounts":
        for v in (self.s_x, self.s_z):
            if v not in (1, s):
                raise DomainError(f"syndrome counts must be 1 or s={s}, got {v}")
        return self

    def full(self, s: int) -> int:
        """delta_{s_z,s} + delta_{s_x,s}"""
        return int(self.s_z == s) + int(self.s_x == s)

    def single(self) -> int:
        """delta_{s_z,1} + delta_{s_x,1}"""
        return int(self.s_z == 1) + int(self.s_x == 1)


@dataclass(frozen=True)
class AncillaStats:
    alpha: float
    beta: float
    p_pass_no_x: float
    p_pass_no_z: float
    p_pass_no_xz: float
    delta_anc: float


class SourceRow(NamedTuple):
    label: str
    delta: float
    count: int


@dataclass(frozen=True)
class FaultSource:
    label: str
    # a location type, or "anc" for ancilla propagation, "gate+ws" for R, "own" for the encoded gate
    delta_selector: str
    count_fn: Callable[[SyndromeCounts, int], int]


_C = SOURCE_COEFFICIENTS

NONLOCAL_SOURCES = (
    FaultSource("propagation from verified ancilla with X error", "anc",
                lambda sc, s: sc.s_x + sc.s_z),
    FaultSource("fault in CZ or CX in S", "2",
                lambda sc, s: _C["S_gate"] * (sc.s_x + sc.s_z)),
    FaultSource("memory faults on data at end of S", "w",
                lambda sc, s: _C["S_data_wait"] * (sc.s_x + sc.s_z)),
    FaultSource("memory faults on data during R", "w",
                lambda sc, s: _C["R_data_wait"] * sc.full(s)),
    FaultSource("fault in gate of R", "gate+ws",
                lambda sc, s: _C["R_gate"] * sc.full(s)),
    FaultSource("memory faults on data when s=1", "w",
                lambda sc, s: 21 * (s - 1) * sc.single()),
    FaultSource("X errors on ancillas waiting for S", "w",
                lambda sc, s: 21 * s * (s - 1) * sc.full(s) // 2),
    FaultSource("encoded gate error", "own",
                lambda sc, s: 7),
)


def _catalog_vectors(catalog: CircuitCatalog) -> tuple[np.ndarray, np.ndarray]:
    return catalog.G.vector(), catalog.V.vector()


def _ec_stats(g1, g2, gw1, gw2, g1m, gp, gmax, params, catalog) -> AncillaStats:
    gcnt, vcnt = _catalog_vectors(catalog)
    no_z, no_x, no_xz, alpha, beta, danc, its = K.ec_stats(
        g1, g2, gw1, gw2, g1m, gp, gmax, gcnt, vcnt, params.s, BETA_TOL, BETA_MAX_ITER)
    if not 0.0 <= alpha <= 1.0:
        raise NumericalError(f"ancilla pass probability alpha={alpha!r} outside [0, 1]")
    if its < 0:
        raise NumericalError(f"zero-syndrome probability did not converge in {BETA_MAX_ITER} iterations")
    return AncillaStats(alpha=alpha, beta=beta, p_pass_no_x=no_x, p_pass_no_z=no_z,
                        p_pass_no_xz=no_xz, delta_anc=danc)


def p_one_plus(delta: float, n: int) -> float:
    """Probability of one or more faults among ``n`` locations failing with probability ``delta``."""
    check_probability(delta, "delta")
    if n < 0:
        raise DomainError(f"location count must be nonnegative, got {n}")
    return K.p_one_plus(float(delta), int(n))


def p_two_plus(delta: float, n: int) -> float:
    """Probability of two or more faults among ``n`` locations."""
    check_probability(delta, "delta")
    if n < 0:
        raise DomainError(f"location count must be nonnegative, got {n}")
    return K.p_two_plus(float(delta), int(n))


def ancilla_pass_stats(rates: NonlocalRates, params: ProtocolParams = ProtocolParams(),
                       catalog: CircuitCatalog = DEFAULT_CATALOG) -> AncillaStats:
    """Ancilla verification statistics and the zero-syndrome probability.

    ``beta`` is included because every consumer needs both; use
    :func:`beta_zero_syndrome` to recompute it from given stats.
    """
    x = rates.as_array()
    return _ec_stats(x[0], x[1], x[2], x[2], x[3], x[4], float(x.max()), params, catalog)


def beta_zero_syndrome(rates: NonlocalRates, params: ProtocolParams, stats: AncillaStats) -> float:
    x = rates.as_array()
    beta, its = K.solve_beta(stats.p_pass_no_z, stats.p_pass_no_x, stats.alpha, x[1], x[3],
                             x[2], x[2], float(x.max()), params.s, BETA_TOL, BETA_MAX_ITER)
    if its < 0:
        raise NumericalError("zero-syndrome probability did not converge")
    return beta


def _delta_for(selector: str, location: str, rates: NonlocalRates, stats: AncillaStats,
               params: ProtocolParams) -> float:
    if selector == "anc":
        return stats.delta_anc
    if selector == "gate+ws":
        return min(rates.gamma_1 + params.gamma_ws, 1.0)
    if selector == "own":
        return rates.rate(location)
    return rates.rate(selector)


def source_table(location: str, sc: SyndromeCounts, rates: NonlocalRates, stats: AncillaStats,
                 params: ProtocolParams = ProtocolParams()) -> list[SourceRow]:
    """The eight fault sources of a rectangle of type ``location`` with their (delta, N)."""
    if location not in NONLOCAL_LOCATIONS:
        raise DomainError(f"unknown nonlocal location type {location!r}")
    sc.check(params.s)
    return [SourceRow(src.label, _delta_for(src.delta_selector, location, rates, stats, params),
                      src.count_fn(sc, params.s))
            for src in NONLOCAL_SOURCES]


def failure_from_sources(rows: list[SourceRow]) -> float:
    """sum over unordered pairs P(1+ in I) P(1+ in J) plus sum P(2+ in I), clamped."""
    p1 = [p_one_plus(r.delta, r.count) for r in rows]
    p2 = [p_two_plus(r.delta, r.count) for r in rows]
    total = sum(p2)
    for i in range(len(p1)):
        for j in range(i):
            total += p1[i] * p1[j]
    return _clamp(total)


def _clamp(v: float) -> float:
    if v > 1.0 + CLAMP_WARN:
        warnings.warn(f"probability expression {v:.4g} clamped to 1", ClampWarning, stacklevel=3)
    return min(max(v, 0.0), 1.0)


def rect_failure_single(location: str, sc: SyndromeCounts, rates: NonlocalRates,
                        stats: AncillaStats, params: ProtocolParams = ProtocolParams()) -> float:
    if location not in ("1", "1m", "p", "w"):
        raise DomainError(f"single-block rectangle expected, got {location!r}")
    return failure_from_sources(source_table(location, sc, rates, stats, params))


def _mix_single(f11: float, fs1: float, fss: float, beta: float) -> float:
    return beta * beta * f11 + 2 * beta * (1 - beta) * fs1 + (1 - beta) ** 2 * fss


def gamma_single(location: str, rates: NonlocalRates, params: ProtocolParams = ProtocolParams(),
                 catalog: CircuitCatalog = DEFAULT_CATALOG, beta: float | None = None) -> float:
    """Next-level failure rate of a single-block rectangle.

    ``beta`` overrides the computed zero-syndrome probability (useful to
    isolate one syndrome-count branch).
    """
    stats = ancilla_pass_stats(rates, params, catalog)
    b = stats.beta if beta is None else check_probability(beta, "beta")
    s = params.s
    f = [rect_failure_single(location, SyndromeCounts(sx, sz), rates, stats, params)
         for sx, sz in ((1, 1), (s, 1), (s, s))]
    return _clamp(_mix_single(*f, b))


def two_block_failure(sc1: SyndromeCounts, sc2: SyndromeCounts, rates: NonlocalRates,
                      stats: AncillaStats, params: ProtocolParams = ProtocolParams()) -> float:
    """F[sx1, sz1, sx2, sz2] of a transversal two-qubit rectangle."""
    g2 = rates.gamma_2
    rows1 = source_table("2", sc1, rates, stats, params)[:-1]
    rows2 = source_table("2", sc2, rates, stats, params)[:-1]
    combined = [SourceRow(a.label, a.delta, a.count + b.count) for a, b in zip(rows1, rows2)]
    one_plus_ec = sum(p_one_plus(r.delta, r.count) for r in combined)
    total = (p_two_plus(g2, 7)
             + 7 * g2 * (1 - g2) ** 6 * one_plus_ec
             + (1 - g2) ** 7 * (failure_from_sources(rows1) + failure_from_sources(rows2)))
    return _clamp(total)


def gamma_two(rates: NonlocalRates, params: ProtocolParams = ProtocolParams(),
              catalog: CircuitCatalog = DEFAULT_CATALOG, beta: float | None = None) -> float:
    """Next-level failure rate of the two-qubit-gate rectangle (16-term syndrome-count sum)."""
    stats = ancilla_pass_stats(rates, params, catalog)
    b = stats.beta if beta is None else check_probability(beta, "beta")
    s = params.s
    total = 0.0
    # m_j = 1 marks a single-syndrome branch; iterate branches rather than values so s = 1 still sums to 1
    for branch in itertools.product((True, False), repeat=4):
        sx1, sz1, sx2, sz2 = (1 if single else s for single in branch)
        m = sum(branch)
        weight = b ** m * (1 - b) ** (4 - m)
        if weight == 0.0:
            continue
        total += weight * two_block_failure(SyndromeCounts(sx1, sz1), SyndromeCounts(sx2, sz2),
                                            rates, stats, params)
    return _clamp(total)


def _warn_overshoot(ov: float) -> None:
    if ov > CLAMP_WARN:
        warnings.warn(f"probability expressions exceeded 1 by up to {ov:.3g}; clamped",
                      ClampWarning, stacklevel=3)


def nonlocal_map(params: ProtocolParams = ProtocolParams(), catalog: CircuitCatalog = DEFAULT_CATALOG,
                 warn: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    """Array-in/array-out nonlocal map, the form the flow engine iterates.

    Clamping of far-above-threshold values is silent unless ``warn`` is set;
    the flow classification does not depend on it.
    """
    gcnt, vcnt = _catalog_vectors(catalog)
    s, gws = params.s, params.gamma_ws

    def step(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(5)
        ov = np.zeros(1)
        its = K.step_nonlocal(x, gcnt, vcnt, s, gws, BETA_TOL, BETA_MAX_ITER, out, ov)
        if its < 0:
            raise NumericalError("zero-syndrome probability did not converge")
        if warn:
            _warn_overshoot(ov[0])
        return out

    step.dim = 5
    step.labels = ("gamma_1", "gamma_2", "gamma_w", "gamma_1m", "gamma_p")
    step.stats = lambda x: ancilla_pass_stats(NonlocalRates.from_array(np.clip(x, 0, 1)), params, catalog)
    return step


def step_map_nonlocal(rates: NonlocalRates, params: ProtocolParams = ProtocolParams(),
                      catalog: CircuitCatalog = DEFAULT_CATALOG) -> NonlocalRates:
    """Rates one concatenation level up."""
    return NonlocalRates.from_array(nonlocal_map(params, catalog, warn=True)(rates.as_array()))


__all__ = [
    "AncillaStats", "ClampWarning", "FaultSource", "NONLOCAL_SOURCES", "NonlocalRates",
    "ProtocolParams", "SourceRow", "SyndromeCounts", "ancilla_pass_stats", "beta_zero_syndrome",
    "failure_from_sources", "gamma_single", "gamma_two", "nonlocal_map", "p_one_plus", "p_two_plus",
    "rect_failure_single", "source_table", "step_map_nonlocal", "two_block_failure",
    "LOCATION_TYPES",
]
