import math

import pytest
from hypothesis import given, strategies as st

from haarsh.logmag import LogMagnitude, log_sum
from haarsh.schedule import (
    BracketingWarning, ModelParams, RegimeUnreachable, ScaleSchedule, L0_of_g, N_tilde,
    _n_tilde_from_ln, bracketing_holds, cover_radii, delta_beta, gamma, length_scale, m_of_g,
    min_L0, n_tilde, schedule_table, validate_params,
)

LN2 = math.log(2)


def test_length_scales():
    assert [length_scale(j, 3) for j in range(4)] == [3, 9, 81, 6561]
    assert length_scale(-1, 3) == 0
    for j in range(4):
        assert length_scale(j, 3) ** 4 == length_scale(j + 2, 3)
    with pytest.raises(OverflowError):
        length_scale(6, 3)


def test_n_tilde_examples():
    assert n_tilde(10, 1, 1) == 15
    assert 3 * math.log(10) / LN2 < 15 < 5 * math.log(10) / LN2
    assert n_tilde(81, 1, 2) == 26
    with pytest.warns(BracketingWarning):
        n_tilde(3, 1, 1)


def test_N_tilde_examples():
    assert N_tilde(10, 1, 1) == 55
    assert N_tilde(10, 1, 1) == n_tilde(10**4, 1, 1)
    At = 55 / math.log(10)
    assert 12 / LN2 <= At <= 20 / LN2
    assert [N_tilde(L, 1, 1) for L in range(2, 50)] == sorted(N_tilde(L, 1, 1) for L in range(2, 50))


def test_delta_beta_example():
    p = ModelParams(A=1, C_A=1, b=2, c_a=2)
    s = ScaleSchedule(10, p)
    delta, beta = delta_beta(0, s, p)
    assert beta.log2_abs == -220
    assert delta.log2_abs == -12320
    assert delta_beta(-1, s, p) == (delta, beta)
    d1, _ = delta_beta(1, s, p)
    assert d1 < delta


def test_delta_summable_over_ten_scales():
    p = ModelParams()
    L0 = 10
    terms = []
    for j in range(11):
        Nt = _n_tilde_from_ln(4 * 2**j * math.log(L0), p.A, p.C_A)
        terms.append(LogMagnitude.pow2(-2 * p.b * Nt - p.c_a * p.b * Nt * Nt))
    assert log_sum(terms) < LogMagnitude.from_float(2.0) * terms[0]
    assert all(b < a for a, b in zip(terms, terms[1:]))


def test_delta_displayed_bound():
    p = ModelParams(A=1, C_A=1, b=2)
    s = ScaleSchedule(10, p)
    for j in range(3):
        Lj = s.L(j)
        rhs = -(3 * p.A) ** 2 * p.b * 4 * math.log(Lj) * math.log2(Lj)
        assert s.delta(j).log2_abs < rhs


def test_gamma_examples():
    assert gamma(1, 0) == 2
    assert gamma(2, 16) == pytest.approx(2 * (1 + 2**-0.5) * 16)
    assert gamma(2, 16) == pytest.approx(54.627, abs=1e-3)
    # L^{-1/8} decays slowly: 1e-3 relative needs L ~ 1e24
    assert gamma(1, 1e24) / 1e24 == pytest.approx(1.0, rel=1e-3)
    assert gamma(1, 1e6) / 1e6 == pytest.approx(1 + 10**-0.75)


def test_constants():
    p = ModelParams(A=1, b=2)
    assert p.B == pytest.approx(1600 / LN2)
    assert p.B == pytest.approx(2308.3, abs=0.05)
    assert p.c1 == pytest.approx(1 / (58 * math.sqrt(2)))
    assert p.c1 == pytest.approx(0.01219, abs=1e-5)
    assert p.c2_min == 136


def test_L0_of_g():
    p = ModelParams(A=1, C_A=1, b=2)
    with pytest.raises(RegimeUnreachable):
        L0_of_g(1e6, 1, p)
    # closed form floor(exp(c1 sqrt(ln g))) at ln g = 100
    assert L0_of_g(LogMagnitude.from_ln(100.0) * LogMagnitude.pow2(5000), 1, p).closed_form >= 1
    assert math.floor(math.exp(p.c1 * math.sqrt(100))) == 1
    picks = []
    for lg in (500, 800, 2000, 5000, 20000, 100000):
        try:
            picks.append(L0_of_g(LogMagnitude.pow2(lg), 1, p).L0)
        except RegimeUnreachable:
            picks.append(0)
    assert picks == sorted(picks) and picks[0] == 0 and picks[-1] >= 3
    got = L0_of_g(LogMagnitude.pow2(20000), 1, p)
    assert got.log2_margin >= 0
    Nt = N_tilde(got.L0 + 1, 1, 1)
    assert 20000 - 2 * 2 * Nt - 2 * 2 * Nt**2 - 2 - 4 / LN2 < 0


def test_m_of_g():
    d = 1
    assert m_of_g(4 * d * math.exp(4), 1.0, d) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        m_of_g(4.0, 1.0, d)
    # log-domain path equals the direct formula when nothing underflows
    assert m_of_g(1e6, LogMagnitude.from_float(0.37), 2) == pytest.approx(0.25 * math.log(1e6 * 0.37 / 8))
    assert m_of_g(1e300, LogMagnitude.pow2(-900), 1) == pytest.approx(
        0.25 * (math.log(1e300) - 900 * LN2 - math.log(4)))


def test_cover_radii_examples():
    p = ModelParams(A=1, C_A=3, A_prime=0, C_A_prime=1, nu=1)
    c = cover_radii(0, p, 3)
    assert float(c.R) == pytest.approx(1 / (18 * 81))
    assert float(c.R) == pytest.approx(6.859e-4, rel=1e-4)
    assert c.r == c.R
    assert c.count == 2916
    assert cover_radii(-1, p, 3) == c


def test_validate_examples():
    assert ModelParams(d=1, A=1, A_prime=0).b_floor == 2
    rep = validate_params(ModelParams(A=1, b=2), ScaleSchedule(10, ModelParams()))
    names = {c.name for c in rep.failures()}
    assert names == {"minami_exponent"}
    bad = validate_params(ModelParams(b=1.5))
    assert "decay_exponent_floor" in {c.name for c in bad.failures()}
    assert min_L0(1, 1) == 5
    assert not bracketing_holds(4, 1, 1) and bracketing_holds(5, 1, 1)
    short = validate_params(ModelParams(), ScaleSchedule(3, ModelParams()))
    assert "initial_scale_bracketing" in {c.name for c in short.failures()}


def test_schedule_table_rows():
    rows = schedule_table(ScaleSchedule(3, ModelParams(A=1, C_A=3)), 3, m=1.0)
    assert [r["j"] for r in rows] == [-1, 0, 1, 2, 3]
    assert [r["L"] for r in rows] == [0, 3, 9, 81, 6561]
    assert rows[0]["gamma"] == 2.0 and rows[0]["N_tilde"] == rows[1]["N_tilde"]
    assert rows == schedule_table(ScaleSchedule(3, ModelParams(A=1, C_A=3)), 3, m=1.0)


@given(st.integers(1, 3), st.integers(1, 5), st.integers(2, 10**6))
def test_bracketing(A, C_A, L):
    if not bracketing_holds(L, A, C_A):
        return
    nt = n_tilde(L, A, C_A)
    lnL = math.log(L)
    assert -5 * A * lnL < -nt * LN2 < -3 * A * lnL
    Nt = N_tilde(L, A, C_A)
    assert -20 * A * lnL < -Nt * LN2 < -12 * A * lnL
