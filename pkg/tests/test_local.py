import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from localft.errors import DomainError
from localft.local import (LOCAL_LOCATIONS, GeometryParams, LocalRates, ReplacementTable,
                           ancilla_stats_local, elementary_rates, gamma_elementary, initial_direction,
                           initial_rates, local_map, source_table_local, step_map_local)
from localft.model import NonlocalRates, SyndromeCounts, ancilla_pass_stats, nonlocal_map, p_two_plus

IDX = {l: i for i, l in enumerate(LOCAL_LOCATIONS)}
# local components that correspond to (gamma_1, gamma_2, gamma_w, gamma_1m, gamma_p)
SHARED = [IDX["1"], IDX["2"], IDX["w1"], IDX["1m"], IDX["p"]]


def lift(x5, w2=None):
    """Nonlocal rate vector to a local one with transport switched off."""
    g1, g2, gw, g1m, gp = x5
    return np.array([g1, g2, gw, gw if w2 is None else w2, 0.0, 0.0, g1m, gp])


def test_geometry_validation_and_segments():
    assert GeometryParams(50, 4).d == 13
    assert GeometryParams(20, 20).d == 1
    for bad in ((0, 1), (5, 6), (5, 0)):
        with pytest.raises(DomainError):
            GeometryParams(*bad)
    with pytest.raises(DomainError):
        GeometryParams(5, 1, epsilon=-0.1)


def test_replacement_table():
    g = GeometryParams(20, 4)
    m = ReplacementTable.for_geometry(g).matrix()
    expect = np.zeros((8, 8), dtype=int)
    for l in ("1", "1m", "p", "w1"):
        expect[IDX[l], IDX[l]] = 1
    expect[IDX["2"], [IDX["md"], IDX["wd"], IDX["2"]]] = [8, 8, 1]
    expect[IDX["md"], IDX["md"]] = 20
    expect[IDX["wd"], IDX["wd"]] = 20
    expect[IDX["w2"], [IDX["wd"], IDX["w2"]]] = [8, 1]
    assert np.array_equal(m, expect)
    # tau = r: 2r moves and 2r waits inside the two-qubit composite
    m1 = ReplacementTable.for_geometry(GeometryParams(7, 7)).matrix()
    assert m1[IDX["2"], IDX["md"]] == 14 and m1[IDX["2"], IDX["wd"]] == 14


def test_initial_rates_wiring():
    g = GeometryParams(50, 4, epsilon=0.5)
    r = initial_rates(1e-5, g)
    assert r.gamma_md == pytest.approx(0.5 * 12.5 * 1e-5)
    assert r.gamma_wd == pytest.approx(0.1 * 12.5 * 1e-5)
    assert r.gamma_w1 == r.gamma_w2 == pytest.approx(1e-6)
    assert np.allclose(initial_direction(g) * 1e-5, r.as_array())


class TestSourceTableLocal:
    def rows(self, j, sx, sz, c=None):
        c = c or LocalRates(*([1e-4] * 8))
        return source_table_local(j, SyndromeCounts(sx, sz), c, ancilla_stats_local(c))

    def test_encoded_gate_row(self):
        c = LocalRates(1e-4, 2e-4, 3e-5, 4e-5, 5e-5, 6e-5, 2e-4, 1e-4)
        rows = self.rows("md", 3, 3, c)
        assert rows[-1].delta == 5e-5 and rows[-1].count == 7

    def test_memory_split(self):
        c = LocalRates(1e-4, 2e-4, 3e-5, 4e-5, 5e-5, 6e-5, 2e-4, 1e-4)
        rows = self.rows("1", 3, 3, c)
        w1_rows = [r for r in rows if r.delta == 3e-5]
        w2_rows = [r for r in rows if r.delta == 4e-5]
        # end of S, during R, s=1 memory (0 here), ancilla waiting
        assert [r.count for r in w1_rows] == [84, 12, 0, 84]
        assert [r.count for r in w2_rows] == [0, 42]

    def test_single_syndrome_memory(self):
        c = LocalRates(1e-4, 2e-4, 3e-5, 4e-5, 5e-5, 6e-5, 2e-4, 1e-4)
        rows = self.rows("1", 1, 3, c)
        # end of S, during R, s=1 memory, ancilla waiting
        assert [r.count for r in rows if r.delta == 3e-5] == [56, 6, 28, 42]
        assert [r.count for r in rows if r.delta == 4e-5] == [14, 21]

    def test_zero_rates(self):
        rows = self.rows("w2", 3, 1, LocalRates(*([0.0] * 8)))
        assert all(r.delta == 0 for r in rows)

    def test_unknown(self):
        with pytest.raises(DomainError):
            self.rows("move", 1, 1)


def test_ancilla_w_exponents_collapse():
    for g in (1e-5, 3e-4, 2e-3):
        x = np.array([g, 2 * g, 0.3 * g, 2 * g, g])
        a = ancilla_pass_stats(NonlocalRates.from_array(x))
        b = ancilla_stats_local(LocalRates.from_array(lift(x)))
        assert b.alpha == pytest.approx(a.alpha, rel=1e-14)
        assert b.beta == pytest.approx(a.beta, rel=1e-14)
    # splitting the waits changes the estimate once w1 and w2 differ
    x = np.array([1e-4, 1e-4, 1e-4, 2e-4, 1e-4])
    split = ancilla_stats_local(LocalRates.from_array(lift(x, w2=5e-4)))
    assert split.alpha < ancilla_pass_stats(NonlocalRates.from_array(x)).alpha


def test_local_alpha_near_threshold():
    g = GeometryParams(20, 2)
    st_ = ancilla_stats_local(initial_rates(7.3e-5, g))
    assert st_.alpha > 0.9


class TestElementary:
    def test_zero(self):
        zero = LocalRates(*([0.0] * 8))
        for j in LOCAL_LOCATIONS:
            assert gamma_elementary(j, zero) == 0.0

    def test_wd_only(self):
        g = 1e-3
        c = LocalRates(0, 0, 0, 0, 0, g, 0, 0)
        # every syndrome branch fails only through the transversal wait(d) row
        assert gamma_elementary("wd", c) == pytest.approx(p_two_plus(g, 7), rel=1e-12)

    def test_reduces_to_nonlocal_single(self):
        from localft.model import gamma_single
        x = np.array([6.9e-5, 1.5e-4, 6.9e-5, 6.9e-5, 6.9e-5])
        c = LocalRates.from_array(lift(x))
        r = NonlocalRates.from_array(x)
        assert gamma_elementary("1", c) == pytest.approx(gamma_single("1", r), rel=1e-12)
        assert gamma_elementary("w1", c) == pytest.approx(gamma_single("w", r), rel=1e-12)

    def test_kernel_matches_reference(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            c = LocalRates.from_array(rng.uniform(0, 2e-3, 8))
            ref = [gamma_elementary(j, c) for j in LOCAL_LOCATIONS]
            assert np.allclose(elementary_rates(c), ref, rtol=1e-12, atol=0)

    def test_composition(self):
        g = GeometryParams(12, 3)
        c = LocalRates.from_array(np.linspace(1e-5, 8e-5, 8))
        e = elementary_rates(c)
        out = step_map_local(c, geometry=g).as_array()
        assert out[IDX["2"]] == pytest.approx(
            1 - (1 - e[IDX["md"]]) ** 6 * (1 - e[IDX["wd"]]) ** 6 * (1 - e[IDX["2"]]), rel=1e-12)
        assert out[IDX["md"]] == pytest.approx(1 - (1 - e[IDX["md"]]) ** 12, rel=1e-12)
        assert out[IDX["p"]] == out[IDX["1"]]


def test_reduction_identity_trajectory():
    fl = local_map(geometry=GeometryParams(1, 1), hold_transport=True)
    fn = nonlocal_map()
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(0, 1e-3, 5)
        c = lift(x)
        for _ in range(10):
            x, c = fn(x), fl(c)
            assert np.max(np.abs(c[SHARED] - x)) < 1e-9
            assert c[IDX["w2"]] == pytest.approx(c[IDX["w1"]], rel=1e-12, abs=1e-300)


@given(arrays(float, 8, elements=st.floats(0, 5e-3)), st.integers(1, 30), st.integers(1, 30))
def test_composite_dominance(c, r, tau):
    tau = min(tau, r)
    g = GeometryParams(r, tau)
    rates = LocalRates.from_array(c)
    e = elementary_rates(rates)
    out = local_map(geometry=g)(c)
    m = ReplacementTable.for_geometry(g).matrix()
    for i in range(8):
        for j in range(8):
            if m[i, j]:
                assert out[i] >= e[j] * (1 - 1e-12)


@given(arrays(float, 8, elements=st.floats(0, 5e-3)), st.integers(1, 20), st.integers(1, 20))
def test_monotone_in_r(c, r, extra):
    tau = 1
    lo = local_map(geometry=GeometryParams(r, tau))(c)
    hi = local_map(geometry=GeometryParams(r + extra, tau))(c)
    assert hi[IDX["md"]] >= lo[IDX["md"]]
    assert hi[IDX["2"]] >= lo[IDX["2"]] * (1 - 1e-12)


@given(arrays(float, 8, elements=st.floats(0, 1)), st.integers(1, 40))
def test_closure(c, r):
    out = local_map(geometry=GeometryParams(r, max(1, r // 3)))(c)
    assert np.all((0 <= out) & (out <= 1))


def test_origin_fixed():
    assert np.array_equal(local_map(geometry=GeometryParams(20, 4))(np.zeros(8)), np.zeros(8))
