"""Scalar kernels for the concatenation maps.

Everything here sticks to the numba nopython subset (floats, int64 arrays,
``math``) so that ``_accel.jit`` can compile it. The public modules wrap
these kernels; they should not be called with unchecked input.

Rate layouts
------------
nonlocal : (g1, g2, gw, g1m, gp)
local    : (g1, g2, gw1, gw2, gmd, gwd, g1m, gp)

Fault-source rows
-----------------
A single-block rectangle has eight fault sources. In the local model two of
them (data waits when only one syndrome is taken, ancillas waiting for S)
mix w1 and w2 locations; they are stored as two rows sharing one group id
and treated as a single source with heterogeneous locations. With
``gw1 == gw2`` this is exactly the nonlocal source.
"""
import math

import numpy as np

from ._accel import jit

# fault-source coefficients fixed by the S and R networks
S_GATE = 7
S_DATA_WAIT = 14
R_DATA_WAIT = 6
R_GATE = 1
# data waits while other blocks finish s-1 extra syndromes: 21 = 14 (w1) + 7 (w2)
EXTRA_WAIT_W1 = 14
EXTRA_WAIT_W2 = 7
TRANSVERSAL = 7

N_ROWS = 10
N_GROUPS = 8
GATE_GROUP = 7

# local indices
L1, L2, LW1, LW2, LMD, LWD, L1M, LP = 0, 1, 2, 3, 4, 5, 6, 7


@jit
def clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@jit
def p_one_plus(delta, n):
    if n <= 0 or delta <= 0.0:
        return 0.0
    if delta >= 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-delta))


@jit
def p_two_plus(delta, n):
    if n < 2 or delta <= 0.0:
        return 0.0
    if delta >= 1.0:
        return 1.0
    v = p_one_plus(delta, n) - n * delta * (1.0 - delta) ** (n - 1)
    return clamp01(v)


@jit
def one_minus_prod(probs, mult):
    """1 - prod_j (1 - probs[j])**mult[j], computed in log space."""
    acc = 0.0
    for j in range(probs.shape[0]):
        if mult[j] == 0:
            continue
        if probs[j] >= 1.0:
            return 1.0
        acc += mult[j] * math.log1p(-probs[j])
    if acc == 0.0:
        return 0.0
    return -math.expm1(acc)


@jit
def fill_rows(g1, g2, gw1, gw2, danc, gws, gate, sx, sz, s, delta, count):
    """Source rows of one single-block rectangle for sx, sz syndromes.

    Row order / group id: 0 ancilla propagation, 1 S gates, 2 data waits at
    end of S, 3 data waits during R, 4 R gate, 5-6 data waits when s=1
    (w1, w2), 7-8 ancillas waiting for S (w1, w2), 9 encoded gate.
    """
    n_syn = sx + sz
    full = (1 if sz == s else 0) + (1 if sx == s else 0)
    single = (1 if sz == 1 else 0) + (1 if sx == 1 else 0)
    delta[0] = danc
    count[0] = n_syn
    delta[1] = g2
    count[1] = S_GATE * n_syn
    delta[2] = gw1
    count[2] = S_DATA_WAIT * n_syn
    delta[3] = gw1
    count[3] = R_DATA_WAIT * full
    delta[4] = clamp01(g1 + gws)
    count[4] = R_GATE * full
    delta[5] = gw1
    count[5] = EXTRA_WAIT_W1 * (s - 1) * single
    delta[6] = gw2
    count[6] = EXTRA_WAIT_W2 * (s - 1) * single
    delta[7] = gw1
    count[7] = EXTRA_WAIT_W1 * s * (s - 1) * full // 2
    delta[8] = gw2
    count[8] = EXTRA_WAIT_W2 * s * (s - 1) * full // 2
    delta[9] = gate
    count[9] = TRANSVERSAL


@jit
def row_groups():
    g = np.empty(N_ROWS, dtype=np.int64)
    g[0] = 0
    g[1] = 1
    g[2] = 2
    g[3] = 3
    g[4] = 4
    g[5] = 5
    g[6] = 5
    g[7] = 6
    g[8] = 6
    g[9] = 7
    return g


@jit
def group_probs(delta, count, group, ngroups, p1, p2):
    """P(1+) and P(2+) faults per source group (rows in a group may have different rates)."""
    for g in range(ngroups):
        logq = 0.0
        certain = False
        for k in range(delta.shape[0]):
            if group[k] != g or count[k] <= 0 or delta[k] <= 0.0:
                continue
            if delta[k] >= 1.0:
                certain = True
            else:
                logq += count[k] * math.log1p(-delta[k])
        if certain:
            p1[g] = 1.0
            p2[g] = 1.0
            continue
        p1[g] = -math.expm1(logq)
        exactly_one = 0.0
        for k in range(delta.shape[0]):
            if group[k] != g or count[k] <= 0 or delta[k] <= 0.0:
                continue
            term = count[k] * delta[k] * (1.0 - delta[k]) ** (count[k] - 1)
            for m in range(delta.shape[0]):
                if m != k and group[m] == g and count[m] > 0:
                    term *= (1.0 - delta[m]) ** count[m]
            exactly_one += term
        p2[g] = clamp01(p1[g] - exactly_one)


@jit
def pair_sum(p1, p2, ngroups):
    """sum_{I>J} P1(I) P1(J) + sum_I P2(I), unclamped."""
    total = 0.0
    for i in range(ngroups):
        total += p2[i]
        for j in range(i):
            total += p1[i] * p1[j]
    return total


@jit
def rect_fail(g1, g2, gw1, gw2, danc, gws, gate, sx, sz, s, with_gate, ov):
    """Failure probability of one single-block rectangle at fixed (sx, sz)."""
    delta = np.empty(N_ROWS)
    count = np.empty(N_ROWS, dtype=np.int64)
    fill_rows(g1, g2, gw1, gw2, danc, gws, gate, sx, sz, s, delta, count)
    group = row_groups()
    p1 = np.empty(N_GROUPS)
    p2 = np.empty(N_GROUPS)
    group_probs(delta, count, group, N_GROUPS, p1, p2)
    ng = N_GROUPS if with_gate else GATE_GROUP
    raw = pair_sum(p1, p2, ng)
    if raw - 1.0 > ov[0]:
        ov[0] = raw - 1.0
    return clamp01(raw)


@jit
def mixture_single(g1, g2, gw1, gw2, danc, gws, gate, s, beta, ov):
    f11 = rect_fail(g1, g2, gw1, gw2, danc, gws, gate, 1, 1, s, True, ov)
    fs1 = rect_fail(g1, g2, gw1, gw2, danc, gws, gate, s, 1, s, True, ov)
    fss = rect_fail(g1, g2, gw1, gw2, danc, gws, gate, s, s, s, True, ov)
    v = beta * beta * f11 + 2.0 * beta * (1.0 - beta) * fs1 + (1.0 - beta) ** 2 * fss
    return clamp01(v)


@jit
def two_block_fail(g1, g2, gw1, gw2, danc, gws, gate, sx1, sz1, sx2, sz2, s, ov):
    """F[sx1, sz1, sx2, sz2] for the transversal two-qubit rectangle with gate rate ``gate``."""
    d1 = np.empty(N_ROWS)
    c1 = np.empty(N_ROWS, dtype=np.int64)
    d2 = np.empty(N_ROWS)
    c2 = np.empty(N_ROWS, dtype=np.int64)
    fill_rows(g1, g2, gw1, gw2, danc, gws, gate, sx1, sz1, s, d1, c1)
    fill_rows(g1, g2, gw1, gw2, danc, gws, gate, sx2, sz2, s, d2, c2)
    # rows carry identical rates in both blocks, so combining the routines adds counts
    cc = c1 + c2
    group = row_groups()
    p1 = np.empty(N_GROUPS)
    p2 = np.empty(N_GROUPS)
    group_probs(d1, cc, group, N_GROUPS, p1, p2)
    one_plus_ec = 0.0
    for g in range(GATE_GROUP):
        one_plus_ec += p1[g]
    f1 = rect_fail(g1, g2, gw1, gw2, danc, gws, gate, sx1, sz1, s, False, ov)
    f2 = rect_fail(g1, g2, gw1, gw2, danc, gws, gate, sx2, sz2, s, False, ov)
    raw = (p_two_plus(gate, TRANSVERSAL)
           + TRANSVERSAL * gate * (1.0 - gate) ** (TRANSVERSAL - 1) * one_plus_ec
           + (1.0 - gate) ** TRANSVERSAL * (f1 + f2))
    if raw - 1.0 > ov[0]:
        ov[0] = raw - 1.0
    return clamp01(raw)


@jit
def mixture_two(g1, g2, gw1, gw2, danc, gws, gate, s, beta, ov):
    total = 0.0
    for mask in range(16):
        sx1 = 1 if mask & 1 else s
        sz1 = 1 if mask & 2 else s
        sx2 = 1 if mask & 4 else s
        sz2 = 1 if mask & 8 else s
        # m_j = 1 for a single syndrome; when s == 1 both branches coincide
        m = (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1) + ((mask >> 3) & 1)
        w = beta ** m * (1.0 - beta) ** (4 - m)
        if w == 0.0:
            continue
        total += w * two_block_fail(g1, g2, gw1, gw2, danc, gws, gate, sx1, sz1, sx2, sz2, s, ov)
    return clamp01(total)


@jit
def ancilla_probs(g1, g2, gw1, gw2, g1m, gp, gcnt, vcnt):
    """Pass-and-no-Z, pass-and-no-X, pass-and-neither, and alpha.

    ``gcnt``/``vcnt`` are the G and V counts ordered (1, 2, w1, w2, 1m, p).
    """
    t = 2.0 / 3.0
    rates = np.empty(6)
    rates[0] = g1
    rates[1] = g2
    rates[2] = gw1
    rates[3] = gw2
    rates[4] = g1m
    rates[5] = gp
    prod_g_full = 1.0
    prod_g_two_thirds = 1.0
    prod_gv_full = 1.0
    for i in range(6):
        prod_g_full *= (1.0 - rates[i]) ** gcnt[i]
        prod_g_two_thirds *= (1.0 - t * rates[i]) ** gcnt[i]
        prod_gv_full *= (1.0 - rates[i]) ** (gcnt[i] + vcnt[i])
    no_z = ((1.0 - gp) ** vcnt[5] * (1.0 - g1) ** vcnt[0] * (1.0 - t * g1m) ** vcnt[4]
            * prod_g_full
            * (1.0 - t * gw2) ** 12 * (1.0 - t * gw1) ** 14 * (1.0 - gw2) ** 6
            * (1.0 - g2) ** vcnt[1])
    no_x = ((1.0 - t * gp) ** vcnt[5] * (1.0 - t * g1) ** vcnt[0] * (1.0 - t * g1m) ** vcnt[4]
            * prod_g_two_thirds
            * (1.0 - t * gw2) ** 18 * (1.0 - t * gw1) ** 14
            * (1.0 - g2) ** vcnt[1])
    no_xz = prod_gv_full
    alpha = no_x + no_z - no_xz
    return no_z, no_x, no_xz, alpha


@jit
def solve_beta(no_z, no_x, alpha, g2, g1m, gw1, gw2, gmax, s, tol, max_iter):
    """Zero-syndrome probability; beta appears on both sides, so iterate from beta = 1.

    Returns (beta, iterations); iterations = -1 signals non-convergence.
    """
    t = 2.0 / 3.0
    if alpha <= 0.0:
        return 0.0, 0
    anc_no_z = min(no_z / alpha, 1.0)
    anc_no_x = min(no_x / alpha, 1.0)
    syn_clean = (1.0 - t * g2) ** 7 * (1.0 - t * g1m) ** 7
    incoming = (1.0 - t * gmax) ** 7
    s1_clean = (1.0 - t * g2) ** 7 * anc_no_x
    waiting = (1.0 - t * gw1) ** (EXTRA_WAIT_W1 * (s - 1)) * (1.0 - t * gw2) ** (EXTRA_WAIT_W2 * (s - 1))
    a = anc_no_z * syn_clean * incoming
    beta = 1.0
    for it in range(1, max_iter + 1):
        nxt = a * (beta * s1_clean * waiting + (1.0 - beta) * s1_clean ** s)
        nxt = clamp01(nxt)
        if abs(nxt - beta) < tol:
            return nxt, it
        beta = nxt
    return beta, -1


@jit
def ec_stats(g1, g2, gw1, gw2, g1m, gp, gmax, gcnt, vcnt, s, tol, max_iter):
    no_z, no_x, no_xz, alpha = ancilla_probs(g1, g2, gw1, gw2, g1m, gp, gcnt, vcnt)
    alpha_c = clamp01(alpha)
    beta, its = solve_beta(no_z, no_x, alpha_c, g2, g1m, gw1, gw2, gmax, s, tol, max_iter)
    if alpha_c > 0.0:
        danc = clamp01(1.0 - no_x / alpha_c)
    else:
        danc = 1.0
    return no_z, no_x, no_xz, alpha, beta, danc, its


@jit
def step_nonlocal(x, gcnt, vcnt, s, gws, tol, max_iter, out, ov):
    """One concatenation level of the nonlocal map. Returns beta-solver iterations (-1 on failure)."""
    g1 = x[0]
    g2 = x[1]
    gw = x[2]
    g1m = x[3]
    gp = x[4]
    gmax = max(max(max(g1, g2), max(gw, g1m)), gp)
    no_z, no_x, no_xz, alpha, beta, danc, its = ec_stats(g1, g2, gw, gw, g1m, gp, gmax, gcnt, vcnt,
                                                         s, tol, max_iter)
    out[0] = mixture_single(g1, g2, gw, gw, danc, gws, g1, s, beta, ov)
    out[1] = mixture_two(g1, g2, gw, gw, danc, gws, g2, s, beta, ov)
    out[2] = mixture_single(g1, g2, gw, gw, danc, gws, gw, s, beta, ov)
    out[3] = mixture_single(g1, g2, gw, gw, danc, gws, g1m, s, beta, ov)
    # preparation rectangles are one-qubit-gate rectangles
    out[4] = out[0]
    return its


@jit
def elementary_local(c, gcnt, vcnt, s, gws, tol, max_iter, hold_transport, elem, ov):
    """Elementary-rectangle failure rates from the composite vector ``c``."""
    g1 = c[L1]
    g2 = c[L2]
    gw1 = c[LW1]
    gw2 = c[LW2]
    g1m = c[L1M]
    gp = c[LP]
    gmax = 0.0
    for i in range(8):
        if c[i] > gmax:
            gmax = c[i]
    no_z, no_x, no_xz, alpha, beta, danc, its = ec_stats(g1, g2, gw1, gw2, g1m, gp, gmax, gcnt, vcnt,
                                                         s, tol, max_iter)
    elem[L1] = mixture_single(g1, g2, gw1, gw2, danc, gws, g1, s, beta, ov)
    elem[L2] = mixture_two(g1, g2, gw1, gw2, danc, gws, g2, s, beta, ov)
    elem[LW1] = mixture_single(g1, g2, gw1, gw2, danc, gws, gw1, s, beta, ov)
    elem[LW2] = mixture_single(g1, g2, gw1, gw2, danc, gws, gw2, s, beta, ov)
    if hold_transport:
        elem[LMD] = 0.0
        elem[LWD] = 0.0
    else:
        elem[LMD] = mixture_single(g1, g2, gw1, gw2, danc, gws, c[LMD], s, beta, ov)
        elem[LWD] = mixture_single(g1, g2, gw1, gw2, danc, gws, c[LWD], s, beta, ov)
    elem[L1M] = mixture_single(g1, g2, gw1, gw2, danc, gws, g1m, s, beta, ov)
    elem[LP] = elem[L1]
    return its


@jit
def compose(elem, mult, out):
    """Composite rates 1 - prod_j (1 - elem[j])**mult[l, j]."""
    for l in range(mult.shape[0]):
        out[l] = one_minus_prod(elem, mult[l])


@jit
def step_local(c, gcnt, vcnt, s, gws, tol, max_iter, mult, hold_transport, out, ov):
    elem = np.empty(8)
    its = elementary_local(c, gcnt, vcnt, s, gws, tol, max_iter, hold_transport, elem, ov)
    compose(elem, mult, out)
    return its
