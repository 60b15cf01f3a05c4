"""Exact-probability engines against big-rational ground truth, plus the
appendix lower bounds on small grids (full grids run in the acceptance
suite)."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisyselect import bounds
from noisyselect.bounds import (ETA, BoundReport, HyperSpec, chernoff_bounds,
                                cor_c2_lower_bound, hyper_pmf,
                                hyper_pmf_fraction, hyper_tail,
                                hyper_tail_fraction, hyper_tails_all, kl_div,
                                kl_quadratic_bound, lem_sampling_check,
                                not_relevant_probability,
                                pointmass_lower_bound, sampling_lemma_check,
                                tail_lower_bound)


class TestHypergeometric:
    def test_pmf_worked_example(self):
        # C(5,2) C(5,2) / C(10,4) = 100/210
        spec = HyperSpec(10, 5, 4, 2)
        assert hyper_pmf(spec) == pytest.approx(100 / 210, rel=1e-12)
        assert hyper_pmf_fraction(10, 5, 4, 2) == Fraction(100, 210)

    def test_tail_worked_example(self):
        # 1 - pmf(0) - pmf(1) = 155/210
        spec = HyperSpec(10, 5, 4, 2)
        assert hyper_tail(spec) == pytest.approx(155 / 210, rel=1e-12)
        assert hyper_tail_fraction(10, 5, 4, 2) == Fraction(155, 210)

    def test_pmf_outside_support_is_zero(self):
        assert hyper_pmf(HyperSpec(10, 5, 4, 6)) == 0.0
        assert hyper_pmf(HyperSpec(10, 9, 4, 1)) == 0.0  # support starts at 3

    def test_all_black_population(self):
        assert hyper_pmf(HyperSpec(10, 10, 4, 4)) == pytest.approx(1.0)

    def test_tail_boundaries(self):
        spec = HyperSpec(10, 5, 4, 0)
        assert hyper_tail(spec) == 1.0
        top = HyperSpec(10, 5, 4, 4)
        assert hyper_tail(top) == pytest.approx(hyper_pmf(top), rel=1e-12)

    def test_pmf_sums_to_one(self):
        spec = HyperSpec(30, 12, 9, 0)
        total = sum(hyper_pmf(HyperSpec(30, 12, 9, l)) for l in range(10))
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_tail_minus_next_tail_is_pmf(self):
        # consistency to 1e-10 relative to the tail magnitude
        for M, K, m in [(25, 10, 6), (60, 31, 15), (200, 150, 50)]:
            for l in range(m + 1):
                tail_l = hyper_tail(HyperSpec(M, K, m, l))
                lhs = tail_l - hyper_tail(HyperSpec(M, K, m, l + 1))
                rhs = hyper_pmf(HyperSpec(M, K, m, l))
                assert abs(lhs - rhs) <= 1e-10 * max(tail_l, rhs)

    def test_tails_all_matches_scalar(self):
        tails = hyper_tails_all(40, 17, 11)
        for l in range(13):
            assert tails[l] == pytest.approx(
                hyper_tail(HyperSpec(40, 17, 11, l)), rel=1e-12, abs=0)

    def test_loggamma_agrees_with_rationals_up_to_200(self):
        # covering grid of the M <= 200 regime
        for M in (2, 3, 7, 20, 51, 100, 200):
            for K in range(0, M + 1, max(1, M // 7)):
                for m in range(0, M + 1, max(1, M // 5)):
                    for l in range(max(0, m - (M - K)), min(m, K) + 1,
                                   max(1, m // 6 + 1)):
                        exact = hyper_pmf_fraction(M, K, m, l)
                        if exact == 0:
                            continue
                        got = hyper_pmf(HyperSpec(M, K, m, l))
                        assert abs(got - float(exact)) <= 1e-10 * float(exact)

    def test_invalid_instance_rejected(self):
        with pytest.raises(ValueError):
            HyperSpec(10, 11, 4, 2)
        with pytest.raises(ValueError):
            HyperSpec(10, 5, 11, 2)


class TestKL:
    def test_zero_iff_equal(self):
        assert kl_div(0.3, 0.3) == 0.0

    def test_worked_example(self):
        # 0.5 ln 2 + 0.5 ln(2/3)
        assert kl_div(0.5, 0.25) == pytest.approx(0.143841, abs=1e-6)

    def test_rejects_boundaries(self):
        for a, b in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)]:
            with pytest.raises(ValueError):
                kl_div(a, b)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_nonnegative_zero_iff_equal(self, a, b):
        d = kl_div(a, b)
        if a == b:
            assert d == 0.0
        else:
            assert d > 0.0

    def test_quadratic_tangent_bound(self):
        # D(0.3 || 0.2) computed by our oracle; bound 2 y^2 / (a(1-a))
        exact = kl_div(0.3, 0.2)
        assert exact == pytest.approx(0.0281683, abs=1e-6)
        bound = kl_quadratic_bound(0.3, -0.1)
        assert bound == pytest.approx(0.095238, abs=1e-5)
        assert exact <= bound

    @given(st.floats(0.05, 0.95), st.floats(-0.4, 0.4))
    def test_quadratic_bound_holds_on_interval(self, a, y):
        if not (-a / 2 <= y <= (1 - a) / 2) or abs(y) < 1e-12:
            return
        if not (0 < a + y < 1):
            return
        assert kl_div(a, a + y) <= kl_quadratic_bound(a, y) + 1e-15


class TestChernoff:
    def test_appendix_arithmetic_reproduced(self):
        # Pr[X <= 7m/8] <= exp(-(1/2)(1/64)^2 (8/9) m) = Q/2
        # for m = 9216 ln(2/Q)
        for Q in (0.5, 0.2, 0.1, 0.01):
            m = 9216 * math.log(2 / Q)
            _, lower = chernoff_bounds(A=(8 / 9) * m, B=(8 / 9) * m,
                                       delta=1 / 64)
            assert lower == pytest.approx(Q / 2, rel=1e-12)

    def test_formula_instantiation(self):
        upper, lower = chernoff_bounds(A=24.0, B=24.0, delta=0.5)
        assert upper == pytest.approx(math.exp(-24 / 12))
        assert lower == pytest.approx(math.exp(-24 / 8))

    def test_delta_to_zero_limit(self):
        upper, lower = chernoff_bounds(10.0, 10.0, 1e-9)
        assert upper == pytest.approx(1.0)
        assert lower == pytest.approx(1.0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            chernoff_bounds(1.0, 2.0, 0.0)
        with pytest.raises(ValueError):
            chernoff_bounds(1.0, 2.0, 1.0)
        with pytest.raises(ValueError):
            chernoff_bounds(3.0, 2.0, 0.5)


class TestLowerBounds:
    def test_eta_constant(self):
        assert ETA == pytest.approx(3.7405e-12, rel=1e-4)

    def test_tail_bound_symmetric_case(self):
        # a = b exactly: bound is eta, exact tail is about half
        spec = HyperSpec(400, 200, 40, 20)
        report = tail_lower_bound(spec)
        assert report.applicable and report.holds
        assert report.bound_value == pytest.approx(ETA, rel=1e-12)
        assert report.exact_value > 0.4

    def test_tail_bound_precondition_reporting(self):
        report = tail_lower_bound(HyperSpec(100, 10, 25, 24))
        assert not report.applicable
        assert "a <= (8/5) b" in report.violations
        assert report.holds  # vacuous, never counted as a counterexample

    def test_pointmass_worked_instance(self):
        report = pointmass_lower_bound(HyperSpec(100, 50, 20, 10))
        assert report.applicable and report.holds
        # log-space slack is finite and positive
        assert report.slack > 0.0

    def test_pointmass_degenerate_edges_not_applicable(self):
        assert not pointmass_lower_bound(HyperSpec(50, 49, 1, 0)).applicable
        assert not pointmass_lower_bound(HyperSpec(50, 20, 10, 10)).applicable

    def test_cor_c2_worked_instance(self):
        report = cor_c2_lower_bound(HyperSpec(200, 80, 30, 12))
        assert report.applicable and report.holds

    def test_small_grids_hold_everywhere(self):
        for sweep in (bounds.sweep_pointmass, bounds.sweep_cor_c2,
                      bounds.sweep_first_tail):
            summary = sweep([40, 73])
            assert summary.checked > 100
            assert summary.failures == 0, summary

    def test_sweep_rows_csv_shape(self):
        text = bounds.sweep_rows_csv([24], "cor_c2")
        lines = text.strip().split("\n")
        assert lines[0] == "M,K,m,l,a,b,x,exact,bound,holds,slack"
        assert len(lines) > 10
        assert all(line.count(",") == 10 for line in lines[1:])


class TestSamplingLemma:
    def test_worked_example_holds(self):
        report = sampling_lemma_check(800, 200, 0.0625, 40)
        assert report.applicable and report.holds

    def test_small_eps_direction(self):
        # eps -> 0: extreme ranks are almost surely not relevant while the
        # bound tends to eta
        report = sampling_lemma_check(800, 200, 1 / 800, 40)
        assert report.applicable and report.holds
        assert report.exact_value > 0.5
        assert report.bound_value == pytest.approx(
            ETA * math.exp(-24 * 4 * (1 / 800) ** 2 * 40), rel=1e-12)

    def test_precondition_reporting(self):
        report = sampling_lemma_check(800, 200, 0.2, 40)
        assert not report.applicable
        assert any("beta" in v for v in report.violations)

    def test_not_relevant_probability_decomposition(self):
        n, k, eps, m = 400, 100, 0.05, 40
        for r in (1, 10, 20, 40):
            p = not_relevant_probability(n, k, eps, m, r)
            assert 0.0 <= p <= 1.0
        # rank 1 of the sample is almost never large
        p_small_heavy = not_relevant_probability(n, k, eps, m, 1)
        assert p_small_heavy == pytest.approx(
            hyper_tail(HyperSpec(n, 80, m, 1)), rel=1e-6)

    def test_lem_sampling_parts_hold(self):
        holds, worst = lem_sampling_check(800, 200, 0.0625, 40)
        assert holds and worst >= 0.0

    def test_small_sampling_sweep(self):
        summary = bounds.sweep_sampling([400])
        assert summary.checked > 20
        assert summary.failures == 0
