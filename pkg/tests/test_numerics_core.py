import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taylorspace.numerics_core import (
    CheckReport,
    PreconditionError,
    TaylorParams,
    TruncationBudget,
    Verdict,
    conjunction,
    euler_entry,
    inverse_taylor_entry,
    inverse_taylor_row,
    row_tail_mass,
    signed_pow,
    sup_report,
    taylor_entry,
    taylor_entry_lgamma,
    taylor_row,
    zero_report,
)


def exact_entry(r: Fraction, n: int, k: int) -> Fraction:
    if k < n:
        return Fraction(0)
    return math.comb(k, n) * (1 - r) ** (n + 1) * r ** (k - n)


# -- params and budget -----------------------------------------------------


def test_r_one_rejected():
    with pytest.raises(PreconditionError):
        TaylorParams(1.0)


def test_regular_mode_needs_unit_interval():
    with pytest.raises(PreconditionError):
        TaylorParams(1.5, regular=True)
    assert TaylorParams(-2.0, regular=False).r == -2.0


@pytest.mark.parametrize("ladder", [(64, 32), (32, 32), (32, 1024)])
def test_budget_rejects_bad_ladders(ladder):
    with pytest.raises(PreconditionError):
        TruncationBudget(ladder=ladder)


def test_budget_rejects_nonpositive_tolerances():
    with pytest.raises(PreconditionError):
        TruncationBudget(abs_tol=0.0)
    with pytest.raises(PreconditionError):
        TruncationBudget(rel_tol=-1.0)


def test_with_cutoff_ladder():
    b = TruncationBudget.with_cutoff(200)
    assert b.ladder == (32, 64, 128, 200)
    assert b.max_col == 200


# -- entries ---------------------------------------------------------------


@pytest.mark.parametrize("n,k", [(0, 0), (3, 3), (2, 5), (5, 2)])
def test_r_zero_is_identity(n, k):
    assert taylor_entry(0.0, n, k) == (1.0 if n == k else 0.0)


def test_taylor_entry_examples():
    assert taylor_entry(0.5, 0, 1) == pytest.approx(0.25, abs=1e-16)
    assert taylor_entry(0.5, 1, 1) == pytest.approx(0.25, abs=1e-16)
    assert taylor_entry(0.3, 4, 2) == 0.0


def test_euler_entry_examples():
    assert euler_entry(0.5, 2, 1) == pytest.approx(0.5)
    assert euler_entry(0.3, 2, 3) == 0.0
    for n in range(5):
        for k in range(5):
            assert euler_entry(1.0, n, k) == (1.0 if n == k else 0.0)


def test_inverse_entry_examples():
    assert inverse_taylor_entry(0.5, 0, 0) == pytest.approx(2.0)
    assert inverse_taylor_entry(0.5, 0, 1) == pytest.approx(-2.0)
    assert inverse_taylor_entry(0.0, 2, 2) == 1.0
    assert inverse_taylor_entry(0.0, 1, 2) == 0.0
    with pytest.raises(PreconditionError):
        inverse_taylor_entry(1.0, 0, 0)


@pytest.mark.parametrize("r", [Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)])
def test_row_matches_exact_rational(r):
    for n in (0, 1, 7, 30):
        row = taylor_row(float(r), n, n + 60)
        for j, v in enumerate(row):
            ex = float(exact_entry(r, n, n + j))
            assert v == pytest.approx(ex, rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 128), st.integers(0, 60))
def test_recurrence_matches_lgamma(r, n, d):
    k = n + d
    direct = taylor_entry_lgamma(r, n, k)
    rec = taylor_entry(r, n, k)
    assert rec == pytest.approx(direct, rel=1e-12, abs=1e-300)


def test_deep_rows_against_mpmath():
    mpmath.mp.dps = 40
    for r in (0.2, 0.9, 0.999):
        for n in (500, 2000):
            row = taylor_row(r, n, n + 40)
            for j in (0, 7, 40):
                ex = mpmath.binomial(n + j, n) * (1 - mpmath.mpf(r)) ** (n + 1) * mpmath.mpf(r) ** j
                assert row[j] == pytest.approx(float(ex), rel=1e-11, abs=1e-300)


def test_underflowing_seed_matches_negative_binomial():
    # row n is the negative binomial pmf of k - n with n+1 successes, success prob 1-r;
    # here (1-r)^(n+1) underflows but the bulk of the row does not
    from scipy.stats import nbinom

    r, n = 0.999, 1000
    row = taylor_row(r, n, 2 * 10**6)
    j = np.array([0, 10**5, 9 * 10**5, 10**6, 1_200_000])
    ref = nbinom.pmf(j, n + 1, 1 - r)
    assert row[0] == 0.0
    np.testing.assert_allclose(row[j[1:]], ref[1:], rtol=1e-9)
    assert math.fsum(row.tolist()) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 0.999))
def test_parameter_involution(r):
    p = TaylorParams(r)
    assert p.inverse().inverse_r == pytest.approx(r, rel=1e-15, abs=1e-17)


@pytest.mark.parametrize("r", [0.1, 0.35, 0.5, 0.8])
def test_inverse_entry_is_taylor_at_mapped_parameter(r):
    s = -r / (1 - r)
    for n in range(0, 51, 5):
        for k in range(n, 51):
            a = inverse_taylor_entry(r, n, k)
            b = taylor_entry(TaylorParams(s, regular=False), n, k)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-300)
    row = inverse_taylor_row(r, 3, 20)
    assert row[0] == pytest.approx(inverse_taylor_entry(r, 3, 3))


def test_signed_pow_tracks_sign_and_scale():
    m, e = signed_pow(-0.5, 3)
    assert math.ldexp(m, e) == -0.125
    m, e = signed_pow(1e-10, 100)
    assert m != 0.0 and e < -3000


# -- tails -----------------------------------------------------------------


def test_row_tail_examples():
    assert row_tail_mass(0.5, 0, 0) == pytest.approx(0.5)
    assert row_tail_mass(0.5, 0, 3) == pytest.approx(0.0625)
    assert row_tail_mass(0.5, 4, 4000) == pytest.approx(0.0, abs=1e-300)
    with pytest.raises(PreconditionError):
        row_tail_mass(1.2, 0, 3)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 128), st.integers(0, 300))
def test_row_stochastic(r, n, extra):
    K = n + extra
    partial = math.fsum(taylor_row(r, n, K).tolist())
    assert abs(partial + row_tail_mass(r, n, K) - 1.0) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 60))
def test_partial_sums_nondecreasing(r, n):
    sums = np.cumsum(taylor_row(r, n, n + 200))
    assert np.all(np.diff(sums) >= -1e-15)
    tails = [row_tail_mass(r, n, n + j) for j in range(0, 200, 7)]
    assert all(b <= a + 1e-15 for a, b in zip(tails, tails[1:]))


# -- reports ---------------------------------------------------------------


def test_report_invariants():
    with pytest.raises(ValueError):
        CheckReport(Verdict.HOLDS_UP_TO_BUDGET, 1.0, ())
    with pytest.raises(ValueError):
        CheckReport(Verdict.HOLDS_UP_TO_BUDGET, 2.0, ((1, 1.0),))
    with pytest.raises(ValueError):
        CheckReport(Verdict.DIVERGENCE_SUSPECTED, 1.0, ((1, 1.0),))


def test_sup_report_verdicts():
    b = TruncationBudget()
    flat = [(c, 2.0) for c in b.ladder]
    assert sup_report(flat, b).verdict is Verdict.HOLDS_UP_TO_BUDGET
    grow = [(c, float(c)) for c in b.ladder]
    rep = sup_report(grow, b)
    assert rep.verdict is Verdict.DIVERGENCE_SUSPECTED
    assert rep.growth_exponent == pytest.approx(1.0)


def test_zero_report_verdicts():
    b = TruncationBudget()
    assert zero_report([(c, 0.0) for c in b.ladder], b).holds
    decay = [(32, 0.1), (64, 1e-3), (128, 5e-11), (256, 1e-27), (512, 1e-60)]
    assert zero_report(decay, b).holds
    rep = zero_report([(c, 0.5) for c in b.ladder], b)
    assert rep.verdict is Verdict.FAILS_AT and rep.fail_value == 0.5


def test_conjunction_order():
    h = CheckReport(Verdict.HOLDS_UP_TO_BUDGET, 0.0, ((1, 0.0),))
    d = CheckReport(Verdict.DIVERGENCE_SUSPECTED, 1.0, ((1, 1.0),), growth_exponent=1.0)
    f = CheckReport(Verdict.FAILS_AT, 1.0, ((1, 1.0),), fail_index=1, fail_value=1.0)
    assert conjunction([h, h]) is Verdict.HOLDS_UP_TO_BUDGET
    assert conjunction([h, d]) is Verdict.DIVERGENCE_SUSPECTED
    assert conjunction([d, f, h]) is Verdict.FAILS_AT
