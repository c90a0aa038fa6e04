import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from taylorspace import geometry as geo
from taylorspace import sequences as sq
from taylorspace.numerics_core import PreconditionError, TaylorParams, Verdict
from taylorspace.sequences import FiniteSupport
from taylorspace.taylor_ops import Preimage, apply_taylor, space_norm

THETAS = [round(0.1 * i, 1) for i in range(1, 21)]


# -- Gurarii ---------------------------------------------------------------


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 7.0])
def test_bound_endpoints(p):
    assert geo.gurarii_bound(0.0, p) == 0.0
    assert geo.gurarii_bound(2.0, p) == 1.0


def test_bound_hilbert_value():
    assert geo.gurarii_bound(math.sqrt(2), 2.0) == pytest.approx(1 - math.sqrt(0.5), abs=1e-15)
    assert geo.gurarii_bound(math.sqrt(2), 2.0) == pytest.approx(0.29289322, abs=1e-8)


def test_bound_rejects_bad_input():
    with pytest.raises(PreconditionError):
        geo.gurarii_bound(2.5, 2.0)
    with pytest.raises(PreconditionError):
        geo.gurarii_bound(1.0, 0.5)
    with pytest.raises(PreconditionError):
        geo.GurariiQuery(1.0, 2.0, TaylorParams(0.5), alpha_tol=0.0)


def test_construct_antipodal_at_theta_two():
    x, y = geo.gurarii_construct(geo.GurariiQuery(2.0, 2.0, TaylorParams(0.5)))
    tx = apply_taylor(0.5, x).as_floats()
    ty = apply_taylor(0.5, y).as_floats()
    assert tx[0] == pytest.approx(0.0, abs=1e-15) and tx[1] == pytest.approx(1.0)
    np.testing.assert_allclose(ty, [-v for v in tx], atol=1e-15)
    sp = sq.taylor_p(2.0, 0.5)
    assert space_norm(sq.add(x, sq.scale(y, -1.0)), sp).value == pytest.approx(2.0, abs=1e-12)


def test_construct_hilbert_pair():
    q = geo.GurariiQuery(math.sqrt(2), 2.0, TaylorParams(0.5))
    x, y = geo.gurarii_construct(q)
    assert len(x) <= 2 and len(y) <= 2
    rep = geo.gurarii_report(q)
    assert abs(rep.norm_x - 1) <= 1e-10 and abs(rep.norm_y - 1) <= 1e-10
    assert abs(rep.dist - math.sqrt(2)) <= 1e-10
    assert rep.inf_value == pytest.approx(math.sqrt(0.5), abs=1e-10)
    assert rep.alpha_star == pytest.approx(0.5, abs=1e-6)
    # p even: polynomial closed form agrees with the ternary search
    assert rep.closed_form_inf == pytest.approx(rep.inf_value, abs=1e-12)


def test_construct_theta_zero_gives_equal_pair():
    x, y = geo.gurarii_construct(geo.GurariiQuery(0.0, 3.0, TaylorParams(0.25)))
    assert x.coeffs == y.coeffs


def test_inf_alpha_trivial_cases():
    sp = sq.taylor_p(2.0, 0.5)
    x = Preimage(FiniteSupport([0.6, 0.8]), 0.5)
    _, val = geo.gurarii_inf_alpha(x, x, sp)
    assert val == pytest.approx(1.0, abs=1e-12)
    y = Preimage(FiniteSupport([-0.6, -0.8]), 0.5)
    alpha, val = geo.gurarii_inf_alpha(x, y, sp)
    assert val == pytest.approx(0.0, abs=1e-10) and alpha == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(PreconditionError):
        geo.gurarii_inf_alpha(x, y, sq.taylor_inf(0.5))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("r", [0.25, 0.5, 0.75])
def test_construction_certificate_on_grid(p, r):
    reps = geo.gurarii_grid(r, p, THETAS)
    for m in reps:
        assert m.construction_ok, m.theta
        assert abs(m.beta_value - m.analytic_bound) <= 1e-8
        assert m.beta_value <= m.analytic_bound + 1e-9
    betas = [m.beta_value for m in reps]
    bounds = [m.analytic_bound for m in reps]
    assert all(b >= a - 1e-12 for a, b in zip(betas, betas[1:]))
    assert all(b >= a for a, b in zip(bounds, bounds[1:]))


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(1.1, 6.0), st.sampled_from([0.25, 0.5, 0.75]))
def test_convexity_flags(theta, p, r):
    # below ~1e-12 the modulus is not resolvable next to 1 in double precision
    assume(geo.gurarii_bound(theta, p) >= 1e-12)
    m = geo.gurarii_report(geo.GurariiQuery(theta, p, TaylorParams(r)))
    assert 0.0 < m.beta_value <= 1.0 + 1e-12
    assert m.convexity_flag == (m.beta_value > 1e-9)


def test_tiny_modulus_underflows_and_is_not_flagged():
    m = geo.gurarii_report(geo.GurariiQuery(1e-3, 5.0, TaylorParams(0.5)))
    assert m.analytic_bound < 1e-16
    assert m.beta_value == 0.0 and not m.convexity_flag


def test_uniform_criterion_is_strict_at_theta_two():
    m = geo.gurarii_report(geo.GurariiQuery(2.0, 2.0, TaylorParams(0.5)))
    assert m.beta_value == pytest.approx(1.0)
    assert m.convexity_flag and not m.uniform_criterion
    m = geo.gurarii_report(geo.GurariiQuery(1.0, 2.0, TaylorParams(0.5)))
    assert m.uniform_criterion


def test_parse_grid_and_csv():
    assert geo.parse_grid("0.1:2.0:0.1") == THETAS
    with pytest.raises(PreconditionError):
        geo.parse_grid("0:1")
    with pytest.raises(PreconditionError):
        geo.parse_grid("1:0:0.1")
    text = geo.modulus_csv(geo.gurarii_grid(0.5, 2.0, [0.5, 1.0]))
    lines = text.strip().split("\n")
    assert lines[0] == "theta,beta,bound" and len(lines) == 3
    assert geo.modulus_csv([], with_delta=True).strip() == "theta,beta,bound,delta"


# -- Clarkson --------------------------------------------------------------


def test_clarkson_theta_zero():
    assert geo.clarkson_estimate(2.0, 0.0) == 0.0
    assert geo.clarkson_estimate(3.0, 0.0) == 0.0


@pytest.mark.parametrize("theta", [0.3, 1.0, math.sqrt(2), 1.9])
def test_clarkson_hilbert_closed_form(theta):
    exact = 1 - math.sqrt(1 - theta**2 / 4)
    assert geo.clarkson_estimate(2.0, theta) == pytest.approx(exact, abs=1e-6)


def test_clarkson_hilbert_matches_gurarii():
    d = geo.clarkson_estimate(2.0, math.sqrt(2))
    assert d == pytest.approx(1 - math.sqrt(0.5), abs=1e-6)
    assert d == pytest.approx(geo.gurarii_bound(math.sqrt(2), 2.0), abs=1e-6)


def test_clarkson_p3_sandwich_high_dim():
    res = geo.clarkson_search(3.0, 1.0, dim=6, samples=10_000, seed=0)
    m = geo.gurarii_report(geo.GurariiQuery(1.0, 3.0, TaylorParams(0.5)))
    assert m.beta_value / 2 - 1e-6 <= res.delta_estimate <= m.beta_value + 1e-6
    assert res.beta_search / 2 - 1e-6 <= res.delta_estimate <= res.beta_search + 1e-6


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_sandwich_on_grid(p):
    for theta in THETAS[1::3]:
        res = geo.clarkson_search(p, theta, samples=600, seed=1)
        assert res.beta_search / 2 - 1e-6 <= res.delta_estimate <= res.beta_search + 1e-6
        assert res.delta_estimate <= geo.gurarii_bound(theta, p) + 1e-6


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
@pytest.mark.parametrize("theta", [0.5, 1.0, 1.5])
def test_two_coordinate_section_is_extremal_for_large_p(p, theta):
    planar = geo.clarkson_search(p, theta, samples=0)
    full = geo.clarkson_search(p, theta, dim=5, samples=3000, seed=2)
    assert full.delta_estimate >= planar.delta_estimate - 1e-9


def test_clarkson_deterministic_given_seed():
    a = geo.clarkson_search(3.0, 1.2, samples=500, seed=7).to_dict()
    b = geo.clarkson_search(3.0, 1.2, samples=500, seed=7).to_dict()
    assert a == b and a["upper_bound"]
    with pytest.raises(PreconditionError):
        geo.clarkson_search(2.0, 1.0, dim=1)


# -- Banach-Saks -----------------------------------------------------------


def config(n, p, r=0.5, family=None, eps=None):
    fam = geo.orthogonal_image_family(r, n) if family is None else family
    return geo.BanachSaksConfig(geo.default_eps(len(fam)) if eps is None else eps, fam, p, TaylorParams(r))


def test_default_eps_schedule():
    e = geo.default_eps(50)
    assert all(v > 0 for v in e) and math.fsum(e) <= 0.25


def test_config_validation():
    with pytest.raises(PreconditionError):
        config(3, 2.0, eps=(0.4, 0.2, 0.1))
    with pytest.raises(PreconditionError):
        config(3, 2.0, eps=(0.1, 0.0, 0.1))
    big = [Preimage(FiniteSupport([2.0]), 0.5)]
    with pytest.raises(PreconditionError):
        config(1, 2.0, family=big)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("r", [0.25, 0.75])
def test_orthogonal_family_full_selection(p, r):
    cfg = config(65, p, r)
    sel = geo.banach_saks_select(cfg)
    assert sel.indices == tuple(range(65)) and not sel.stalled
    assert sel.splits == tuple(range(65))
    assert all(b > a for a, b in zip(sel.indices, sel.indices[1:]))
    assert all(b > a for a, b in zip(sel.splits, sel.splits[1:]))
    assert min(sel.bound_margin) >= 0.0
    rep = geo.banach_saks_check(sel, cfg)
    assert rep.verdict is Verdict.HOLDS_UP_TO_BUDGET
    for n, s in enumerate(sel.partial_sum_norms):
        assert s == pytest.approx((n + 1) ** (1 / p), rel=1e-9)


def test_prefix_norm_examples():
    sel = geo.banach_saks_select(config(4, 2.0))
    assert sel.partial_sum_norms[3] == pytest.approx(2.0, rel=1e-12)
    assert sel.partial_sum_norms[0] == pytest.approx(1.0)
    sel1 = geo.banach_saks_select(config(2, 1.0))
    assert sel1.partial_sum_norms[1] == pytest.approx(2.0)
    assert sel1.bound_margin[1] == pytest.approx(2.0)


def test_single_and_zero_families():
    sel = geo.banach_saks_select(config(1, 2.0))
    assert sel.stages == 1 and sel.indices == (0,)
    zeros = [Preimage(FiniteSupport([]), 0.5) for _ in range(5)]
    sel = geo.banach_saks_select(config(5, 2.0, family=zeros))
    assert sel.indices == (0, 1, 2, 3, 4) and not sel.stalled
    assert sel.splits == (0, 1, 2, 3, 4)
    assert all(m > 0 for m in sel.bound_margin)


def test_stall_is_reported():
    # every member has the same head, so no later index qualifies
    same = [Preimage(FiniteSupport([1.0]), 0.5) for _ in range(4)]
    sel = geo.banach_saks_select(config(4, 2.0, family=same))
    assert sel.stalled and sel.stages == 1


def test_weak_null_family():
    fam = geo.orthogonal_image_family(0.5, 65)
    assert geo.weak_null_check(fam, 0.5).holds
    const = [Preimage(FiniteSupport([0.5]), 0.5) for _ in range(16)]
    assert geo.weak_null_check(const, 0.5).verdict is Verdict.FAILS_AT


# -- Garcia-Falset ---------------------------------------------------------


def test_gfc_zero_probe():
    rep = geo.garcia_falset_estimate(0.5, 2.0, probes=[FiniteSupport([])])
    assert rep.R_estimate == pytest.approx(1.0, abs=1e-12)


def test_gfc_first_basis_probe():
    rep = geo.garcia_falset_estimate(0.5, 2.0, probes=[Preimage(sq.unit(0), 0.5)])
    assert rep.R_estimate == pytest.approx(math.sqrt(2), abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("r", [0.25, 0.5, 0.75])
def test_gfc_matches_two_to_one_over_p(p, r):
    rep = geo.garcia_falset_estimate(r, p)
    target = 2 ** (1 / p)
    assert target - 1e-3 <= rep.R_estimate <= target + 1e-9
    assert all(v <= target + 1e-9 for v in rep.per_x)
    assert rep.to_dict()["R_below_2"]


def test_gfc_rejects_probe_outside_ball():
    with pytest.raises(PreconditionError):
        geo.garcia_falset_estimate(0.5, 2.0, probes=[Preimage(FiniteSupport([3.0]), 0.5)])
    with pytest.raises(PreconditionError):
        geo.garcia_falset_estimate(0.5, 2.0, n_max=1)
