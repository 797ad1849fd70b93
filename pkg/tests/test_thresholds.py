import math

import numpy as np
import pytest

from pottstree import PottsParams, build_chain, branch_solution, critical_thresholds, theta_m
from pottstree.extremality import kesten_stigum
from pottstree.thresholds import (
    big_theta,
    branch_inequality_lhs,
    eta1,
    eta1_max,
    free_msw_threshold,
    fuzzy_cubic,
    psi2_shortcut,
    s_poly,
    u_poly,
)
from pottstree._roots import find_root
from pottstree.errors import SolverError

SQ2 = math.sqrt(2.0)


def thr(q, m):
    return critical_thresholds(PottsParams(q, 2, q + 1.0), m)


def test_closed_form_fields():
    for q in range(3, 15):
        for m in range(1, q // 2 + 1):
            t = thr(q, m)
            assert t.theta_m == pytest.approx(1 + 2 * math.sqrt(m * (q - m)), rel=1e-14)
            assert t.theta_hat == pytest.approx((SQ2 - 1) * q + 2 * m + 1, rel=1e-14)
            assert t.theta_star == pytest.approx(1 + (SQ2 + 1) * q - 2 * m, rel=1e-14)
            assert t.theta_0 == pytest.approx(1 + q + 2 * math.sqrt(2 * m * (q - m)), rel=1e-14)
            assert t.theta_hat_0 == pytest.approx(1 + (SQ2 + 1) * q, rel=1e-14)
            assert t.theta_c == q + 1


def test_relabelled_block_uses_smaller_side():
    assert thr(7, 5).as_dict()["theta_hat"] == thr(7, 2).theta_hat


def test_q3_double_star():
    t = thr(3, 1)
    assert t.theta_double_star == pytest.approx(4.2277, abs=5e-4)
    assert t.theta_star - t.theta_double_star == pytest.approx(2.0149, abs=5e-4)
    assert t.theta_star == pytest.approx(3 * SQ2 + 2, rel=1e-14)
    assert abs(s_poly(t.theta_double_star, 3)) < 1e-9 * 6 * t.theta_double_star**4


def test_double_star_window_ordering():
    for q in range(3, 30):
        t = thr(q, 1)
        if t.theta_double_star is not None:
            assert q + 1 < t.theta_double_star < t.theta_star


def test_q7_hat_minus_theta1():
    t = thr(7, 1)
    assert t.theta_m == pytest.approx(1 + 2 * math.sqrt(6), rel=1e-14)
    assert t.theta_hat - t.theta_m == pytest.approx(0.00051, abs=5e-5)


def test_q6_m2_values():
    t = thr(6, 2)
    assert t.theta_star == pytest.approx(3 * (1 + 2 * SQ2), rel=1e-13)
    assert t.theta_breve == pytest.approx(7.25, abs=5e-2)
    assert t.theta_grave == 7.0
    assert abs(t.theta_hat - (6 * SQ2 - 1)) <= 1e-12
    assert abs(big_theta(t.theta_breve, 6)) < 1e-8


def test_grave_is_analytic_root():
    # at theta = 7 the discriminant is 20 and the left side is 49 - 56 - 1 + 4*sqrt(4) = 0
    assert branch_inequality_lhs(7.0, 6, 2, upper=True) == pytest.approx(0.0, abs=1e-12)


def test_q2_degenerate_flag():
    t = critical_thresholds(PottsParams(2, 2, 3.0), 1)
    assert t.theta_m == 3.0 == t.theta_c
    assert t.fold_meets_critical


def test_general_k_leaves_k2_fields_absent():
    t = critical_thresholds(PottsParams(5, 3, 3.0), 1)
    assert t.theta_hat is None and t.theta_double_star is None
    assert t.theta_m > 1 and t.theta_c == pytest.approx(3.5)


def test_u_positive():
    for q in range(2, 41):
        grid = np.linspace(theta_m(q, 1), q + 1, 2001)
        assert np.all(u_poly(grid, q) > 0), q


def test_psi2_below_theta1():
    for q in range(2, 41):
        assert psi2_shortcut(q) < theta_m(q, 1)


def test_free_msw_threshold_root():
    for q in range(2, 12):
        for k in (2, 3, 5):
            t = free_msw_threshold(q, k)
            kappa = (t - 1) / (t + q - 1)
            gam = (t - 1) / (t + 1)
            assert k * kappa * gam == pytest.approx(1.0, rel=1e-12)
    assert free_msw_threshold(3, 2) == pytest.approx(7.0, rel=1e-14)


def test_cubic_roots_bracket_positive_eta1():
    seen = 0
    for q, m in [(86, 1), (100, 1), (200, 2), (300, 3)]:
        t = thr(q, m)
        if t.theta_bar is None:
            continue
        seen += 1
        assert t.theta_m < t.theta_bar < t.theta_barbar < q + 1
        mid = np.linspace(t.theta_bar, t.theta_barbar, 51)[1:-1]
        assert np.all(eta1(mid, q, m) > 0)
        outside = np.concatenate([np.linspace(t.theta_m, t.theta_bar, 51)[1:-1],
                                  np.linspace(t.theta_barbar, q + 1, 51)[1:-1]])
        assert np.all(eta1(outside, q, m) < 0)
        for r in (t.theta_bar, t.theta_barbar):
            assert abs(eta1(r, q, m)) < 1e-8
            assert abs(fuzzy_cubic(r, q, m)) < 1e-6 * q**3
    assert seen == 4


def test_cubic_window_onset_is_computed_not_assumed():
    # the maximum of eta1 over the branch changes sign between q = 85 and 86 for m = 1
    assert eta1_max(85, 1)[1] < 0 < eta1_max(86, 1)[1]
    assert thr(85, 1).theta_bar is None
    assert thr(86, 1).theta_bar is not None


def _ks_crossing(q, m, branch, lo, hi):
    def f(t):
        p = PottsParams(q, 2, t)
        ch = build_chain(p, branch_solution(p, m, branch))
        return kesten_stigum(ch, 2).value_full - 1.0
    return find_root(f, lo, hi)


def test_ks_crossing_matches_theta_star_m1():
    for q in (3, 5, 8):
        t = thr(q, 1)
        got = _ks_crossing(q, 1, "z1", q + 1.5, t.theta_star + 5)
        assert abs(got - t.theta_star) < 1e-9


def test_ks_crossing_matches_theta_hat_upper():
    t = thr(6, 2)
    got = _ks_crossing(6, 2, "z2", t.theta_m + 1e-9, 20.0)
    assert abs(got - t.theta_hat) < 1e-9


def test_find_root_reports_bad_bracket():
    with pytest.raises(SolverError) as info:
        find_root(lambda x: x * x + 1, -1.0, 1.0)
    assert info.value.bracket == (-1.0, 1.0)


def test_m1_hole_matches_msw_transitions():
    from pottstree import classify, Verdict
    t = thr(17, 1)
    assert t.theta_hole_lo is not None and t.theta_m < t.theta_hole_lo < t.theta_hole_hi < 18
    for theta, want in [(t.theta_hole_lo - 1e-3, Verdict.EXTREME_MSW),
                        (t.theta_hole_lo + 1e-3, Verdict.UNDECIDED),
                        (t.theta_hole_hi - 1e-3, Verdict.UNDECIDED),
                        (t.theta_hole_hi + 1e-3, Verdict.EXTREME_MSW)]:
        p = PottsParams(17, 2, theta)
        assert classify(p, branch_solution(p, 1, "z1")).verdict is want
    assert thr(16, 1).theta_hole_lo is None
