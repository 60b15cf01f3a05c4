"""Approximate median: schedule exactness, purifying-round laws, baseline."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisyselect.approx_median import (approx_median, median_schedule,
                                       purify_median_round, sm_baseline,
                                       sm_sample_size)
from noisyselect.oracle import NoisyOracle, new_universe
from noisyselect.primitives import vote_cost, vote_failure_exact


def make(n=1000, k=500, eps=0.1, p=0.25, seed=7):
    truth = new_universe(n, k, eps, seed)
    return truth, NoisyOracle.create(truth, p, seed + 1)


class TestMedianSchedule:
    def test_worked_example_levels(self):
        sched = median_schedule(100_000, 0.1)
        assert sched.L == 3
        eps_values = [lvl.eps_i for lvl in sched.levels]
        assert eps_values == pytest.approx([0.1, 0.125, 0.15625, 0.1953125])
        assert sched.levels[1].n_i == 128_000
        assert sched.levels[2].n_i == 163_840

    def test_threshold_gives_empty_schedule(self):
        sched = median_schedule(1000, 0.2)
        assert sched.L == 0
        assert sched.final_eps == 0.2

    def test_rejects_out_of_range_eps(self):
        with pytest.raises(ValueError):
            median_schedule(100, 0.0)
        with pytest.raises(ValueError):
            median_schedule(100, 0.5)
        with pytest.raises(ValueError):
            median_schedule(100, 0.1, scale=0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.002, 0.166))
    def test_schedule_invariants(self, eps):
        sched = median_schedule(10_000, eps)
        eps_f = Fraction(eps)
        assert sched.L >= 1
        for i, lvl in enumerate(sched.levels):
            if i == 0:
                assert lvl.eps_i == eps
                assert lvl.n_i == 10_000
                continue
            expect_eps = Fraction(5, 4) ** i * eps_f
            assert lvl.eps_i == float(expect_eps)
            expect_n = math.ceil(
                2000 * i * Fraction(4, 5) ** (2 * i) / (eps_f * eps_f))
            assert lvl.n_i == expect_n
        # strictly increasing epsilon, minimal L
        eps_seq = [lvl.eps_i for lvl in sched.levels]
        assert all(a < b for a, b in zip(eps_seq, eps_seq[1:]))
        assert eps_seq[-1] >= 1 / 6
        assert all(e < 1 / 6 for e in eps_seq[:-1])

    def test_scaled_mode_shrinks_sizes(self):
        paper = median_schedule(10_000, 0.1)
        scaled = median_schedule(10_000, 0.1, scale=0.01)
        assert scaled.L == paper.L
        for a, b in zip(paper.levels[1:], scaled.levels[1:]):
            assert b.n_i == math.ceil(a.n_i * 0.01) or b.n_i <= a.n_i


class TestPurifyMedianRound:
    def test_empty_target(self):
        truth, oracle = make()
        out = purify_median_round(oracle, np.arange(10), 0)
        assert len(out) == 0
        assert oracle.calls_used() == 0

    def test_exact_call_count(self):
        truth, oracle = make(p=0.25)
        purify_median_round(oracle, np.arange(100), 500)
        assert oracle.calls_used() == 500 * 3 * 97

    def test_output_drawn_from_source(self):
        truth, oracle = make()
        source = np.array([3, 14, 15, 92, 65])
        out = purify_median_round(oracle, source, 1000)
        assert set(out.tolist()) <= set(source.tolist())

    def test_noiseless_small_probability_law(self):
        # P[median of three is small] = 3 s^2 (1-s) + s^3
        truth, oracle = make(n=1000, k=500, eps=0.1, p=0.0, seed=17)
        small_ranks = [100, 200, 300, 400]          # small: rank <= 400
        other_ranks = [450, 500, 550, 600, 700, 800]
        source = truth.ids_of_ranks(np.array(small_ranks + other_ranks))
        s = len(small_ranks) / len(source)
        expect = 3 * s * s * (1 - s) + s**3
        out = purify_median_round(oracle, source, 100_000)
        got = (truth.ranks_of(out) <= truth.window_low).mean()
        sigma = math.sqrt(expect * (1 - expect) / 100_000)
        assert abs(got - expect) <= 4 * sigma

    def test_good_source_small_probability_bound(self):
        # a good source with margin eps' keeps P[small] <= 1/2 - (4/3) eps'
        truth, oracle = make(n=1000, k=500, eps=0.1, p=0.25, seed=23)
        eps_prime = 0.1
        n_src = 1000
        # ranks 1..400 small, 401..600 relevant, 601..1000 large -> the
        # window (400, 600] of the source is entirely relevant: good
        source = truth.ids_of_ranks(np.arange(1, n_src + 1))
        out = purify_median_round(oracle, source, 120_000)
        got = (truth.ranks_of(out) <= truth.window_low).mean()
        bound = 0.5 - (4 / 3) * eps_prime
        assert got <= bound + 4 * math.sqrt(bound * (1 - bound) / 120_000)

    def test_dummy_votes_not_charged(self):
        truth, oracle = make(p=0.25)
        source = np.concatenate([np.arange(10), oracle.add_dummies(10)])
        purify_median_round(oracle, source, 2000)
        assert oracle.calls_used() < 2000 * 3 * 97
        assert oracle.calls_used() % 97 == 0


class TestSmBaseline:
    def test_sample_sizes(self):
        assert sm_sample_size(1 / 6) == 91
        assert sm_sample_size(0.2) == 63
        assert sm_sample_size(0.5) == 11

    def test_noiseless_returns_sample_median(self):
        truth, oracle = make(p=0.0, seed=37)
        items = truth.ids_of_ranks(np.arange(1, 201))
        got = sm_baseline(oracle, items, 0.25)
        # exact median of the drawn multiset: rerun the sampling stream
        truth2, oracle2 = make(p=0.0, seed=37)
        m = sm_sample_size(0.25)
        sample = items[oracle2.rng.integers(len(items), m)]
        want = sorted(sample.tolist(), key=lambda e: truth.rank_of[e])[m // 2]
        assert got == want

    def test_failure_rate(self):
        # eps = 1/6, p = 0.25: empirical failure <= 1/36 + 3 sigma
        truth = new_universe(10_000, 5000, 1 / 6, seed=41)
        oracle = NoisyOracle.create(truth, 0.25, seed=42)
        items = np.arange(truth.n)
        trials = 2000
        fails = 0
        for _ in range(trials):
            got = sm_baseline(oracle, items, 1 / 6)
            fails += not truth.is_relevant(truth.rank_of[got])
        rate = fails / trials
        assert rate <= 1 / 36 + 3 * math.sqrt((1 / 36) * (35 / 36) / trials)


class TestApproxMedian:
    def test_threshold_case_equals_baseline(self):
        truth, oracle = make(p=0.25, seed=43)
        items = np.arange(truth.n)
        got = approx_median(oracle, items, 0.2)
        truth2, oracle2 = make(p=0.25, seed=43)
        want = sm_baseline(oracle2, items, 0.2)
        assert got == want
        assert oracle.calls_used() == oracle2.calls_used()

    def test_noiseless_failure_is_rare(self):
        truth = new_universe(2000, 1000, 0.15, seed=47)
        oracle = NoisyOracle.create(truth, 0.0, seed=48)
        items = np.arange(truth.n)
        fails = 0
        trials = 150
        for _ in range(trials):
            got = approx_median(oracle, items, 0.15, scale=0.02)
            fails += not truth.is_relevant(truth.rank_of[got])
        assert fails / trials <= 1 / 18

    def test_noisy_failure_within_theorem_bound(self):
        truth = new_universe(2000, 1000, 0.15, seed=53)
        oracle = NoisyOracle.create(truth, 0.25, seed=54)
        items = np.arange(truth.n)
        fails = 0
        trials = 300
        for _ in range(trials):
            got = approx_median(oracle, items, 0.15, scale=0.02)
            fails += not truth.is_relevant(truth.rank_of[got])
        bound = 1 / 18
        assert fails / trials <= bound + 3 * math.sqrt(bound * (1 - bound)
                                                       / trials)

    def test_call_accounting_decomposes(self):
        truth, oracle = make(n=2000, k=1000, eps=0.15, p=0.25, seed=59)
        items = np.arange(truth.n)
        sched = median_schedule(truth.n, 0.15, 0.02)
        approx_median(oracle, items, 0.15, scale=0.02)
        purify_calls = sum(lvl.n_i * 3 * 97 for lvl in sched.levels[1:])
        sm_votes_cost = oracle.calls_used() - purify_calls
        m = sm_sample_size(sched.final_eps)
        delta = (1 / 72) / (m * math.ceil(math.log2(m)) + 1)
        per_vote = vote_cost(0.25, math.ceil(math.log(1 / delta)))
        assert sm_votes_cost > 0
        assert sm_votes_cost % per_vote == 0
        assert sm_votes_cost // per_vote <= m * math.ceil(math.log2(m)) + 1

    def test_rejects_bad_eps(self):
        truth, oracle = make()
        with pytest.raises(ValueError):
            approx_median(oracle, np.arange(100), 0.6)
