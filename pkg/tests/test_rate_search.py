import math

import pytest

from bjscc.bounds import baseline_scheme, bsc_bound, disjoint_scheme, hybrid_scheme
from bjscc.rate_search import (
    baseline_limit_rate,
    max_rate,
    max_rate_hybrid_opt,
    rate_curve,
)


class TestMaxRate:
    def test_noiseless_closed_form(self):
        # bound (1 + 2**n / M)**-1 <= eps inverts to M = 2**n eps / (1 - eps)
        p = max_rate(disjoint_scheme(1), 10, 0.0, 0.01)
        expected = (10 + math.log2(0.01 / 0.99)) / 10
        assert p.rate == pytest.approx(expected, abs=1e-4)
        assert p.feasible

    def test_useless_channel_infeasible(self):
        p = max_rate(disjoint_scheme(1), 10, 0.5, 0.01)
        assert p.rate == 0.0 and not p.feasible

    def test_bracket_certificate(self):
        p = max_rate(disjoint_scheme(4), 10, 0.05, 0.01)
        assert bsc_bound(disjoint_scheme(4), 10, 0.05, p.M) <= 0.01
        assert bsc_bound(disjoint_scheme(4), 10, 0.05, p.M * (1 + 1e-6)) > 0.01

    def test_monotone_in_K_and_eps(self):
        r1 = max_rate(disjoint_scheme(32), 10, 0.05, 0.01).rate
        r2 = max_rate(disjoint_scheme(64), 10, 0.05, 0.01).rate
        assert r2 >= r1
        r3 = max_rate(disjoint_scheme(32), 10, 0.05, 0.05).rate
        assert r3 >= r1

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            max_rate(disjoint_scheme(1), 10, 0.05, 0.0)


class TestHybridOpt:
    def test_dominates_both_extremes(self):
        for K in (1, 4, 16, 64):
            h = max_rate_hybrid_opt(10, 0.05, 0.01, K)
            dj = max_rate(disjoint_scheme(K), 10, 0.05, 0.01)
            bl = max_rate(baseline_scheme(K), 10, 0.05, 0.01)
            assert h.rate >= max(dj.rate, bl.rate) - 1e-12

    def test_single_decoder_all_schemes_coincide(self):
        h = max_rate_hybrid_opt(10, 0.05, 0.01, 1)
        dj = max_rate(disjoint_scheme(1), 10, 0.05, 0.01)
        bl = max_rate(baseline_scheme(1), 10, 0.05, 0.01)
        assert h.rate == pytest.approx(dj.rate, abs=1e-12)
        assert h.rate == pytest.approx(bl.rate, abs=1e-12)
        assert h.J == 1

    def test_interior_group_count_appears(self):
        hits = [max_rate_hybrid_opt(10, 0.05, 0.01, K) for K in (16, 64, 256, 1024)]
        assert any(1 < h.J < h.K for h in hits)

    def test_ties_break_to_smaller_group_count(self):
        # useless channel: every divisor is infeasible at rate 0
        h = max_rate_hybrid_opt(6, 0.5, 0.01, 12)
        assert h.rate == 0.0 and h.J == 1


class TestRateCurve:
    def test_row_count_and_order(self):
        pts = rate_curve([10, 20], 0.05, 0.01, [1, 2, 4])
        assert len(pts) == 3 * 2 * 3
        assert [p.scheme for p in pts[:3]] == ["disjoint"] * 3
        assert [p.K for p in pts[:3]] == [1, 2, 4]

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            rate_curve([10], 0.05, 0.01, [1], schemes=["disjoint", "magic"])

    def test_baseline_rates_below_limit(self):
        lim = baseline_limit_rate(10, 0.05, 0.01)
        pts = rate_curve([10], 0.05, 0.01, [2**i for i in range(8)],
                         schemes=["baseline"])
        assert all(p.rate <= lim + 1e-12 for p in pts)

    def test_hybrid_scheme_constructor_guard(self):
        with pytest.raises(ValueError):
            hybrid_scheme(0, 4)
