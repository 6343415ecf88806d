"""Location counts of the Steane error-correction networks.

The counts are data (gate counts per routine), not derived by simulating
the circuits. Location types are ordered ``(1, 2, w1, w2, 1m, p)``; in the
nonlocal analysis ``w1`` and ``w2`` are both plain wait locations.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import _kernels as _K
from .errors import DomainError

LOCATION_TYPES = ("1", "2", "w1", "w2", "1m", "p")

# Coefficients of the fault-source table that are fixed by the networks:
# per syndrome, S puts 7 two-qubit gates and 14 waits on the data block;
# a recovery adds 6 data waits and a single one-qubit gate.
SOURCE_COEFFICIENTS = MappingProxyType({
    "S_gate": _K.S_GATE,
    "S_data_wait": _K.S_DATA_WAIT,
    "R_data_wait": _K.R_DATA_WAIT,
    "R_gate": _K.R_GATE,
})

# Exponents of the wait factors in the ancilla pass probabilities.
# Nonlocal: pass-and-no-Z uses (1-2gw/3)^26 (1-gw)^6, pass-and-no-X (1-2gw/3)^32.
# Local: the same waits split into w1/w2 as 14/12+6 and 14/18.
ANCILLA_WAIT_EXPONENTS = MappingProxyType({
    "noz_weighted": 26,
    "noz_full": 6,
    "nox_weighted": 32,
    "noz_w2_weighted": 12,
    "noz_w1_weighted": 14,
    "noz_w2_full": 6,
    "nox_w2_weighted": 18,
    "nox_w1_weighted": 14,
})


@dataclass(frozen=True)
class RoutineCounts:
    routine: str
    counts: Mapping[str, int]
    time_steps: int
    # optional finer split of a count, e.g. V's w2 = 15 + 3
    splits: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        missing = set(LOCATION_TYPES) - set(self.counts)
        if missing:
            raise DomainError(f"routine {self.routine}: missing counts for {sorted(missing)}")
        if any(int(v) < 0 for v in self.counts.values()):
            raise DomainError(f"routine {self.routine}: negative count")
        if self.time_steps < 1:
            raise DomainError(f"routine {self.routine}: time_steps must be positive")
        object.__setattr__(self, "counts", MappingProxyType({k: int(self.counts[k]) for k in LOCATION_TYPES}))
        object.__setattr__(self, "splits", MappingProxyType(dict(self.splits)))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def vector(self) -> np.ndarray:
        return np.array([self.counts[k] for k in LOCATION_TYPES], dtype=np.int64)


@dataclass(frozen=True)
class CircuitCatalog:
    S: RoutineCounts
    G: RoutineCounts
    V: RoutineCounts
    R: RoutineCounts

    def routines(self) -> dict[str, RoutineCounts]:
        return {"S": self.S, "G": self.G, "V": self.V, "R": self.R}

    def with_count(self, routine: str, location: str, value: int) -> "CircuitCatalog":
        """Copy of the catalog with one entry changed (for fault injection and sensitivity checks)."""
        old = getattr(self, routine)
        counts = dict(old.counts)
        counts[location] = value
        return replace(self, **{routine: replace(old, counts=counts, splits={})})

    def to_dict(self) -> dict:
        return {
            "location_types": list(LOCATION_TYPES),
            "routines": {
                name: {
                    "counts": dict(rc.counts),
                    "time_steps": rc.time_steps,
                    "splits": {k: list(v) for k, v in rc.splits.items()},
                    "total": rc.total,
                }
                for name, rc in self.routines().items()
            },
            "source_coefficients": dict(SOURCE_COEFFICIENTS),
            "ancilla_wait_exponents": dict(ANCILLA_WAIT_EXPONENTS),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def checksum(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


DEFAULT_CATALOG = CircuitCatalog(
    S=RoutineCounts("S", {"1": 0, "2": 7, "w1": 14, "w2": 0, "1m": 7, "p": 0}, time_steps=3),
    G=RoutineCounts("G", {"1": 3, "2": 9, "w1": 4, "w2": 3, "1m": 0, "p": 7}, time_steps=5),
    V=RoutineCounts("V", {"1": 4, "2": 13, "w1": 14, "w2": 18, "1m": 4, "p": 4}, time_steps=6,
                    splits={"w2": (15, 3)}),
    R=RoutineCounts("R", {"1": 1, "2": 0, "w1": 6, "w2": 0, "1m": 0, "p": 0}, time_steps=1),
)


def n_rep(s: int, alpha: float) -> int:
    """Number of ancillas prepared per error-correction type, ceil(s / alpha)."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    # guard against s/alpha landing a hair above an integer through rounding
    return math.ceil(s / alpha - 1e-12)


def ec_footprint(params, alpha: float) -> int:
    """Qubits in one nonlocal error-correction routine, data block included."""
    return 7 + 2 * n_rep(params.s, alpha) * (7 + 3)


def local_rect_location_count(geometry=None, params=None, catalog: CircuitCatalog = DEFAULT_CATALOG,
                              alpha: float = 0.9) -> int:
    """Locations in one elementary 1-rectangle, used as the default A_{l,C}.

    Convention: ``n_rep = ceil(s/alpha)`` ancillas each pass through G and V,
    ``2 s`` syndrome extractions (X and Z, ``s`` each), one recovery, plus the
    7 transversal locations of the encoded operation. ``geometry`` does not
    enter the count because the EC routines themselves are not made local.
    """
    from .model import ProtocolParams

    params = params or ProtocolParams()
    reps = n_rep(params.s, alpha)
    return (reps * (catalog.G.total + catalog.V.total)
            + 2 * params.s * catalog.S.total
            + catalog.R.total
            + 7)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    expected: int
    actual: int

    @property
    def passed(self) -> bool:
        return self.expected == self.actual


def validate_against_sources(catalog: CircuitCatalog = DEFAULT_CATALOG) -> list[IdentityCheck]:
    """Cross-check catalog counts against the constants hard-wired in the failure formulas."""
    S, V, R = catalog.S.counts, catalog.V.counts, catalog.R.counts
    ex = ANCILLA_WAIT_EXPONENTS
    checks = [
        IdentityCheck("S two-qubit gates per syndrome = source coefficient 7(sx+sz)",
                      SOURCE_COEFFICIENTS["S_gate"], S["2"]),
        IdentityCheck("S data waits per syndrome = source coefficient 14(sx+sz)",
                      SOURCE_COEFFICIENTS["S_data_wait"], S["w1"] + S["w2"]),
        IdentityCheck("R data waits = source coefficient 6(...)",
                      SOURCE_COEFFICIENTS["R_data_wait"], R["w1"] + R["w2"]),
        IdentityCheck("R one-qubit gates = source coefficient 1(...)",
                      SOURCE_COEFFICIENTS["R_gate"], R["1"]),
        IdentityCheck("V waits = no-X wait exponent", ex["nox_weighted"], V["w1"] + V["w2"]),
        IdentityCheck("V waits = no-Z wait exponents", ex["noz_weighted"] + ex["noz_full"], V["w1"] + V["w2"]),
        IdentityCheck("V w1 = local w1 exponents", ex["noz_w1_weighted"], V["w1"]),
        IdentityCheck("V w1 = local no-X w1 exponent", ex["nox_w1_weighted"], V["w1"]),
        IdentityCheck("V w2 = local no-Z w2 exponents", ex["noz_w2_weighted"] + ex["noz_w2_full"], V["w2"]),
        IdentityCheck("V w2 = local no-X w2 exponent", ex["nox_w2_weighted"], V["w2"]),
    ]
    split = catalog.V.splits.get("w2")
    if split is not None:
        checks.append(IdentityCheck("V w2 split sums to stored count", V["w2"], sum(split)))
    return checks
