"""Analytic threshold estimate for local concatenation and the sparseness recursion.

With ``A`` locations per elementary rectangle, ``k`` tolerated faults and a
spatial scale factor ``r``, a composite rectangle fails with probability at
most ``r C(A, k+1) gamma^(k+1)``. Requiring this to shrink gives the critical
rate ``(r C(A, k+1))^(-1/k)``.

The recursion for the probability ``P(n)`` that a composite n-rectangle is
sparse is evaluated in complement/log space: ``1 - P(n)`` drops below the
smallest double long before the bound ``gamma_0^((1+delta)^n)`` does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NumericalError

DELTA_FRACTION = 0.99


@dataclass(frozen=True)
class AnalyticParams:
    r: int
    a_lc: int
    k: int = 1
    gamma_0: float = 0.0

    def __post_init__(self):
        _check_structure(self.r, self.a_lc, self.k)
        if not 0.0 <= self.gamma_0 <= 1.0:
            raise DomainError(f"gamma_0 must lie in [0, 1], got {self.gamma_0}")


@dataclass(frozen=True)
class SparseBound:
    """Sparseness probabilities for levels 1..n and the margin delta used."""

    levels: tuple[float, ...]
    log_failure: tuple[float, ...]  # log(1 - P(n)); -inf once it is exactly zero
    delta: float

    @property
    def p_lower(self) -> float:
        return self.levels[-1]


def _check_structure(r: int, a_lc: int, k: int) -> None:
    if k < 1:
        raise DomainError("k must be at least 1 (the estimate diverges at k = 0)")
    if r < 1:
        raise DomainError(f"r must be a positive integer, got {r}")
    if a_lc < k + 1:
        raise DomainError(f"a_lc must be at least k + 1 = {k + 1}, got {a_lc}")


def _log_rc(r: int, a_lc: int, k: int) -> float:
    return math.log(r) + math.log(math.comb(a_lc, k + 1))


def gamma_crit(r: int, a_lc: int, k: int = 1) -> float:
    """Critical base failure rate ``1 / (r C(a_lc, k+1))^(1/k)``."""
    _check_structure(r, a_lc, k)
    return math.exp(-_log_rc(r, a_lc, k) / k)


def delta_margin(gamma_0: float, r: int, a_lc: int, k: int = 1) -> float:
    """A margin delta > 0 with ``r C(a_lc, k+1) gamma_0^(k+1) < gamma_0^(1+delta)``.

    The supremum is ``k + log(r C) / log(gamma_0)``; we return a fixed fraction of it.
    """
    _check_structure(r, a_lc, k)
    if not 0.0 < gamma_0 < gamma_crit(r, a_lc, k):
        raise DomainError(f"gamma_0 = {gamma_0:g} is above analytic threshold "
                          f"{gamma_crit(r, a_lc, k):g}" if gamma_0 > 0 else "gamma_0 must be positive")
    sup = k + _log_rc(r, a_lc, k) / math.log(gamma_0)
    return DELTA_FRACTION * sup


def _log_one_minus_exp(x: float) -> float:
    """log(1 - e^x) for x <= 0."""
    if x == -math.inf:
        return 0.0
    return math.log(-math.expm1(x)) if x > -0.693 else math.log1p(-math.exp(x))


def _next_log_failure(log_q: float, r: int, log_c: float, k: int) -> float:
    """log(1 - P') where P' = (1 - C q^(k+1))^r and q = e^log_q."""
    log_fail_one = log_c + (k + 1) * log_q
    if log_fail_one >= 0.0:
        return 0.0
    # 1 - (1 - x)^r = -expm1(r log1p(-x))
    log_sparse = r * _log_one_minus_exp(log_fail_one)
    if log_sparse == 0.0:
        # 1 - (1-x)^r ~ r x when r x is below machine resolution
        return math.log(r) + log_fail_one
    return _log_one_minus_exp(log_sparse)


def sparse_prob_sequence(gamma_0: float, r: int, a_lc: int, k: int = 1, n: int = 1) -> SparseBound:
    """Iterate the sparseness recursion to level ``n`` and check the level-wise lower bound.

    Raises :class:`DomainError` when ``gamma_0`` is not below ``gamma_crit``.
    """
    _check_structure(r, a_lc, k)
    if n < 1:
        raise DomainError(f"level n must be at least 1, got {n}")
    if not 0.0 <= gamma_0 <= 1.0:
        raise DomainError(f"gamma_0 must lie in [0, 1], got {gamma_0}")
    if gamma_0 == 0.0:
        return SparseBound((1.0,) * n, (-math.inf,) * n, math.inf)
    delta = delta_margin(gamma_0, r, a_lc, k)
    log_c = math.log(math.comb(a_lc, k + 1))
    log_g = math.log(gamma_0)
    levels, logs = [], []
    log_q = log_g
    for level in range(1, n + 1):
        log_q = _next_log_failure(log_q, r, log_c, k)
        bound = (1.0 + delta) ** level * log_g
        if not log_q < bound:
            raise NumericalError(f"sparseness bound violated at level {level}: "
                                  f"log(1-P) = {log_q:.6g} >= {bound:.6g}")
        logs.append(log_q)
        levels.append(-math.expm1(log_q) if log_q > -math.inf else 1.0)
    return SparseBound(tuple(levels), tuple(logs), delta)


def sparse_prob_lower_bound(gamma_0: float, r: int, a_lc: int, k: int = 1, n: int = 1) -> tuple[float, float]:
    """``(P(n), delta)`` for the sparseness recursion, asserting the bound at each level."""
    seq = sparse_prob_sequence(gamma_0, r, a_lc, k, n)
    return seq.p_lower, seq.delta


def lemma_bound_holds(gamma_0: float, r: int, a_lc: int, k: int, n: int) -> bool:
    """Check ``1 - P(m) < gamma_0^((1+delta)^m)`` for m = 1..n, in log space."""
    try:
        sparse_prob_sequence(gamma_0, r, a_lc, k, n)
    except NumericalError:
        return False
    return True
