"""Local (movement-constrained) concatenation map.

Every location becomes a composite rectangle built from elementary
rectangles (gates, waits, and the move(d)/wait(d) steps of transport).
Elementary failure rates are functions of the level-(n-1) composite rates;
a composite rectangle fails when any of its elementary rectangles fails.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import astuple, dataclass, fields
from types import MappingProxyType
from typing import Callable

import numpy as np

from . import _kernels as K
from .catalog import DEFAULT_CATALOG, CircuitCatalog
from .errors import DomainError, NumericalError
from .model import (BETA_MAX_ITER, BETA_TOL, AncillaStats, ProtocolParams, SourceRow,
                    SyndromeCounts, _catalog_vectors, _clamp, _ec_stats, _mix_single,
                    _warn_overshoot, check_probability, p_one_plus, p_two_plus)

LOCAL_LOCATIONS = ("1", "2", "w1", "w2", "md", "wd", "1m", "p")


@dataclass(frozen=True)
class LocalRates:
    gamma_1: float
    gamma_2: float
    gamma_w1: float
    gamma_w2: float
    gamma_md: float
    gamma_wd: float
    gamma_1m: float
    gamma_p: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, check_probability(getattr(self, f.name), f.name))

    @classmethod
    def from_array(cls, x) -> "LocalRates":
        x = np.asarray(x, dtype=float)
        if x.shape != (8,):
            raise DomainError(f"expected 8 local rates, got shape {x.shape}")
        return cls(*x.tolist())

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def rate(self, location: str) -> float:
        try:
            return float(self.as_array()[LOCAL_LOCATIONS.index(location)])
        except ValueError:
            raise DomainError(f"unknown local location type {location!r}") from None


@dataclass(frozen=True)
class GeometryParams:
    """Transport geometry: blocks move distance ``r``, error-corrected ``tau`` times on the way."""

    r: int
    tau: int
    epsilon: float = 1.0

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise DomainError(f"r must be a positive integer, got {self.r}")
        if int(self.tau) != self.tau or not 1 <= self.tau <= self.r:
            raise DomainError(f"tau must be an integer in [1, r], got {self.tau}")
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be nonnegative, got {self.epsilon}")

    @property
    def d(self) -> int:
        """Segment length between in-transit corrections; the short last segment is not modelled."""
        return math.ceil(self.r / self.tau)


# location -> ((elementary type, multiplicity symbol), ...); symbols: 1, "2tau", "r"
_REPLACEMENT = MappingProxyType({
    "1": (("1", 1),),
    "2": (("md", "2tau"), ("wd", "2tau"), ("2", 1)),
    "1m": (("1m", 1),),
    "p": (("p", 1),),
    "md": (("md", "r"),),
    "wd": (("wd", "r"),),
    "w1": (("w1", 1),),
    "w2": (("wd", "2tau"), ("w2", 1)),
})


@dataclass(frozen=True)
class ReplacementTable:
    """Elementary rectangles (with multiplicity) inside each composite rectangle."""

    entries: MappingProxyType

    @classmethod
    def for_geometry(cls, geometry: GeometryParams) -> "ReplacementTable":
        sym = {1: 1, "2tau": 2 * geometry.tau, "r": geometry.r}
        return cls(MappingProxyType({l: tuple((j, sym[m]) for j, m in parts)
                                     for l, parts in _REPLACEMENT.items()}))

    def matrix(self) -> np.ndarray:
        m = np.zeros((8, 8), dtype=np.int64)
        for l, parts in self.entries.items():
            for j, mult in parts:
                m[LOCAL_LOCATIONS.index(l), LOCAL_LOCATIONS.index(j)] += mult
        return m


def initial_rates(gamma_2: float, geometry: GeometryParams) -> LocalRates:
    """Base-level rates used for the transport studies.

    Gates, measurement and preparation fail at ``gamma_2`` (so gamma_1m is
    twice that), waits at a tenth of it, and per-segment transport scales
    with the transit ratio: gamma_md = epsilon (r/tau) gamma_2,
    gamma_wd = 0.1 (r/tau) gamma_2. The unrounded ratio is used here, while
    the segment count in the replacement table uses the integer d.
    """
    d = geometry.r / geometry.tau
    g = gamma_2
    return LocalRates(gamma_1=g, gamma_2=g, gamma_w1=0.1 * g, gamma_w2=0.1 * g,
                      gamma_md=min(geometry.epsilon * d * g, 1.0), gamma_wd=min(0.1 * d * g, 1.0),
                      gamma_1m=min(2 * g, 1.0), gamma_p=g)


def initial_direction(geometry: GeometryParams) -> np.ndarray:
    """Rate vector per unit gamma_2 matching :func:`initial_rates`."""
    d = geometry.r / geometry.tau
    return np.array([1.0, 1.0, 0.1, 0.1, geometry.epsilon * d, 0.1 * d, 2.0, 1.0])


def _stats(c: np.ndarray, params: ProtocolParams, catalog: CircuitCatalog) -> AncillaStats:
    return _ec_stats(c[0], c[1], c[2], c[3], c[6], c[7], float(c.max()), params, catalog)


def ancilla_stats_local(composite_rates: LocalRates, params: ProtocolParams = ProtocolParams(),
                        catalog: CircuitCatalog = DEFAULT_CATALOG) -> AncillaStats:
    """Ancilla statistics from composite rates, with w1/w2 split wait factors."""
    return _stats(composite_rates.as_array(), params, catalog)


# (label, delta selector, count function, source group)
_LOCAL_ROWS = (
    ("propagation from verified ancilla with X error", "anc", lambda sc, s: sc.s_x + sc.s_z, 0),
    ("fault in CZ or CX in S", "2", lambda sc, s: 7 * (sc.s_x + sc.s_z), 1),
    ("memory faults on data at end of S", "w1", lambda sc, s: 14 * (sc.s_x + sc.s_z), 2),
    ("memory faults on data during R", "w1", lambda sc, s: 6 * sc.full(s), 3),
    ("fault in gate of R", "gate+ws", lambda sc, s: sc.full(s), 4),
    ("memory faults (w1) on data when s=1", "w1", lambda sc, s: 14 * (s - 1) * sc.single(), 5),
    ("memory faults (w2) on data when s=1", "w2", lambda sc, s: 7 * (s - 1) * sc.single(), 5),
    ("X errors on ancillas waiting (w1) for S", "w1", lambda sc, s: 14 * s * (s - 1) * sc.full(s) // 2, 6),
    ("X errors on ancillas waiting (w2) for S", "w2", lambda sc, s: 7 * s * (s - 1) * sc.full(s) // 2, 6),
    ("encoded gate error", "own", lambda sc, s: 7, 7),
)


def source_table_local(j: str, sc: SyndromeCounts, composite_rates: LocalRates, stats: AncillaStats,
                       params: ProtocolParams = ProtocolParams()) -> list[SourceRow]:
    """Fault-source rows of an elementary rectangle of type ``j`` (ten rows, eight sources)."""
    if j not in LOCAL_LOCATIONS:
        raise DomainError(f"unknown local location type {j!r}")
    sc.check(params.s)
    rows = []
    for label, sel, count_fn, _ in _LOCAL_ROWS:
        if sel == "anc":
            delta = stats.delta_anc
        elif sel == "gate+ws":
            delta = min(composite_rates.gamma_1 + params.gamma_ws, 1.0)
        elif sel == "own":
            # the preparation rectangle is a one-qubit-gate rectangle
            delta = composite_rates.rate("1" if j == "p" else j)
        else:
            delta = composite_rates.rate(sel)
        rows.append(SourceRow(label, delta, count_fn(sc, params.s)))
    return rows


def source_groups() -> tuple[int, ...]:
    """Source id of each row of :func:`source_table_local`."""
    return tuple(g for *_, g in _LOCAL_ROWS)


def _grouped_probs(rows: list[SourceRow]) -> tuple[list[float], list[float]]:
    """P(1+) and P(2+) per source, where a source may span rows with different rates."""
    groups: dict[int, list[SourceRow]] = {}
    for g, row in zip(source_groups(), rows):
        groups.setdefault(g, []).append(row)
    p1, p2 = [], []
    for g in sorted(groups):
        members = [r for r in groups[g] if r.count > 0]
        if len(members) <= 1:
            r = members[0] if members else SourceRow("", 0.0, 0)
            p1.append(p_one_plus(r.delta, r.count))
            p2.append(p_two_plus(r.delta, r.count))
            continue
        if any(r.delta >= 1.0 for r in members):
            p1.append(1.0)
            p2.append(1.0)
            continue
        # 1 - prod(1 - d)^n in log space; subtracting from 1 directly loses ~1e-12 relative
        at_least_one = -math.expm1(sum(r.count * math.log1p(-r.delta) for r in members))
        exactly_one = sum(r.count * r.delta * (1 - r.delta) ** (r.count - 1)
                          * math.prod((1 - o.delta) ** o.count for o in members if o is not r)
                          for r in members)
        p1.append(at_least_one)
        p2.append(min(max(at_least_one - exactly_one, 0.0), 1.0))
    return p1, p2


def _fail_local(rows: list[SourceRow], with_gate: bool = True) -> float:
    p1, p2 = _grouped_probs(rows)
    if not with_gate:
        p1, p2 = p1[:-1], p2[:-1]
    total = sum(p2) + sum(p1[i] * p1[k] for i in range(len(p1)) for k in range(i))
    return _clamp(total)


def gamma_elementary(j: str, composite_rates: LocalRates, params: ProtocolParams = ProtocolParams(),
                     catalog: CircuitCatalog = DEFAULT_CATALOG, geometry: GeometryParams | None = None,
                     beta: float | None = None) -> float:
    """Failure rate of an elementary rectangle of type ``j`` one level up.

    ``geometry`` does not enter a single elementary rectangle; it is accepted
    for symmetry with :func:`step_map_local`.
    """
    if j not in LOCAL_LOCATIONS:
        raise DomainError(f"unknown local location type {j!r}")
    stats = ancilla_stats_local(composite_rates, params, catalog)
    b = stats.beta if beta is None else check_probability(beta, "beta")
    s = params.s
    if j != "2":
        f = [_fail_local(source_table_local(j, SyndromeCounts(sx, sz), composite_rates, stats, params))
             for sx, sz in ((1, 1), (s, 1), (s, s))]
        return _clamp(_mix_single(*f, b))

    g2 = composite_rates.gamma_2
    total = 0.0
    for branch in itertools.product((True, False), repeat=4):
        sx1, sz1, sx2, sz2 = (1 if single else s for single in branch)
        m = sum(branch)
        weight = b ** m * (1 - b) ** (4 - m)
        if weight == 0.0:
            continue
        rows1 = source_table_local("2", SyndromeCounts(sx1, sz1), composite_rates, stats, params)
        rows2 = source_table_local("2", SyndromeCounts(sx2, sz2), composite_rates, stats, params)
        combined = [SourceRow(a.label, a.delta, a.count + c.count) for a, c in zip(rows1, rows2)]
        p1, _ = _grouped_probs(combined)
        f = (p_two_plus(g2, 7)
             + 7 * g2 * (1 - g2) ** 6 * sum(p1[:-1])
             + (1 - g2) ** 7 * (_fail_local(rows1, False) + _fail_local(rows2, False)))
        total += weight * _clamp(f)
    return _clamp(total)


def local_map(params: ProtocolParams = ProtocolParams(), catalog: CircuitCatalog = DEFAULT_CATALOG,
              geometry: GeometryParams = GeometryParams(1, 1), hold_transport: bool = False,
              warn: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    """Array-in/array-out local map on composite rates.

    ``hold_transport`` pins the move(d)/wait(d) elementary rates at zero, which
    switches transport off entirely (used for the reduction to the nonlocal map).
    """
    gcnt, vcnt = _catalog_vectors(catalog)
    mult = ReplacementTable.for_geometry(geometry).matrix()
    s, gws = params.s, params.gamma_ws

    def step(c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        out = np.empty(8)
        ov = np.zeros(1)
        its = K.step_local(c, gcnt, vcnt, s, gws, BETA_TOL, BETA_MAX_ITER, mult, hold_transport, out, ov)
        if its < 0:
            raise NumericalError("zero-syndrome probability did not converge")
        if warn:
            _warn_overshoot(ov[0])
        return out

    step.dim = 8
    step.labels = tuple(f"gamma_{l}" for l in LOCAL_LOCATIONS)
    step.stats = lambda c: _stats(np.clip(np.asarray(c, dtype=float), 0, 1), params, catalog)
    return step


def elementary_rates(composite_rates: LocalRates, params: ProtocolParams = ProtocolParams(),
                     catalog: CircuitCatalog = DEFAULT_CATALOG, hold_transport: bool = False) -> np.ndarray:
    """All eight elementary failure rates (kernel path), ordered like :data:`LOCAL_LOCATIONS`."""
    gcnt, vcnt = _catalog_vectors(catalog)
    elem = np.empty(8)
    ov = np.zeros(1)
    its = K.elementary_local(composite_rates.as_array(), gcnt, vcnt, params.s, params.gamma_ws,
                             BETA_TOL, BETA_MAX_ITER, hold_transport, elem, ov)
    if its < 0:
        raise NumericalError("zero-syndrome probability did not converge")
    return elem


def step_map_local(composite_rates: LocalRates, params: ProtocolParams = ProtocolParams(),
                   catalog: CircuitCatalog = DEFAULT_CATALOG, geometry: GeometryParams = GeometryParams(1, 1),
                   hold_transport: bool = False) -> LocalRates:
    """Composite rates one concatenation level up."""
    fn = local_map(params, catalog, geometry, hold_transport, warn=True)
    return LocalRates.from_array(fn(composite_rates.as_array()))
