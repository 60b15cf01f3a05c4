"""Ground truth construction and the noisy comparison fault model."""

import math

import numpy as np
import pytest

from noisyselect.oracle import (LARGE, RELEVANT, SMALL, GroundTruth,
                                NoisyOracle, new_universe)


def make(n=1000, k=500, eps=0.1, p=0.25, seed=7):
    truth = new_universe(n, k, eps, seed)
    return truth, NoisyOracle.create(truth, p, seed)


class TestGroundTruth:
    def test_deterministic_for_fixed_seed(self):
        a = new_universe(4, 2, 0.25, seed=7)
        b = new_universe(4, 2, 0.25, seed=7)
        np.testing.assert_array_equal(a.rank_of, b.rank_of)
        c = new_universe(4, 2, 0.25, seed=8)
        assert not np.array_equal(a.rank_of, c.rank_of)

    def test_rank_of_is_bijection(self):
        truth = new_universe(1000, 100, 0.05, seed=3)
        assert sorted(truth.rank_of.tolist()) == list(range(1, 1001))

    def test_classification_partition_small_example(self):
        truth = new_universe(4, 2, 0.25, seed=1)
        # small = (0, 1], relevant = (1, 3], large = (3, 4]
        assert truth.classify(1) == SMALL
        assert truth.classify(2) == RELEVANT
        assert truth.classify(3) == RELEVANT
        assert truth.classify(4) == LARGE

    def test_every_rank_in_exactly_one_class(self):
        truth = new_universe(500, 125, 0.07, seed=2)
        counts = {SMALL: 0, RELEVANT: 0, LARGE: 0}
        for r in range(1, truth.n + 1):
            counts[truth.classify(r)] += 1
        assert sum(counts.values()) == truth.n

    def test_mirroring_restores_small_k(self):
        truth = new_universe(10, 8, 0.1, seed=5)
        assert truth.mirrored
        assert truth.k == 2
        assert truth.n == 10

    def test_odd_n_padded_with_largest(self):
        truth = new_universe(5, 2, 0.1, seed=5)
        assert truth.padded
        assert truth.n == 6
        assert truth.rank_of[5] == 6  # the pad element holds the top rank

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            new_universe(10, 0, 0.1, 1)
        with pytest.raises(ValueError):
            new_universe(10, 11, 0.1, 1)
        with pytest.raises(ValueError):
            new_universe(10, 5, 0.0, 1)
        with pytest.raises(ValueError):
            new_universe(10, 5, 0.5, 1)

    def test_ids_of_ranks_inverts_rank_of(self):
        truth = new_universe(64, 16, 0.1, seed=9)
        ranks = np.arange(1, 65)
        ids = truth.ids_of_ranks(ranks)
        np.testing.assert_array_equal(truth.rank_of[ids], ranks)


class TestNoisyOracle:
    def test_noiseless_compare_is_true_order(self):
        truth, oracle = make(p=0.0)
        ids = truth.ids_of_ranks(np.array([3, 5]))
        assert oracle.compare(int(ids[0]), int(ids[1])) is True
        assert oracle.calls_used() == 1

    def test_counter_counts_every_charged_call(self):
        truth, oracle = make()
        a, b = int(truth.ids_of_ranks(np.array([1]))[0]), \
            int(truth.ids_of_ranks(np.array([2]))[0])
        assert oracle.calls_used() == 0
        for i in range(10):
            oracle.compare(a, b)
        assert oracle.calls_used() == 10

    def test_empirical_error_rate(self):
        # same pair queried 10^6 times: wrong fraction within 0.002 of p
        truth, oracle = make(p=0.25)
        a, b = int(truth.ids_of_ranks(np.array([10]))[0]), \
            int(truth.ids_of_ranks(np.array([900]))[0])
        n = 1_000_000
        firsts = oracle.repeat_compare(a, b, n)
        wrong = (n - firsts) / n  # a truly precedes b
        assert abs(wrong - 0.25) < 0.002
        assert oracle.calls_used() == n

    def test_unbiasedness_within_four_sigma(self):
        for p, seed in [(0.05, 1), (0.25, 2), (0.4, 3)]:
            truth, oracle = make(p=p, seed=seed)
            a, b = int(truth.ids_of_ranks(np.array([1]))[0]), \
                int(truth.ids_of_ranks(np.array([1000]))[0])
            n = 100_000
            firsts = oracle.repeat_compare(a, b, n)
            wrong = (n - firsts) / n
            assert abs(wrong - p) <= 4 * math.sqrt(p * (1 - p) / n)

    def test_identical_seed_identical_answers(self):
        truth = new_universe(100, 50, 0.1, seed=4)
        o1 = NoisyOracle.create(truth, 0.3, seed=11)
        o2 = NoisyOracle.create(truth, 0.3, seed=11)
        seq1 = [o1.compare(0, 1) for _ in range(100)]
        seq2 = [o2.compare(0, 1) for _ in range(100)]
        assert seq1 == seq2

    def test_repeated_queries_are_independent(self):
        truth, oracle = make(p=0.4)
        a, b = 0, 1
        answers = {oracle.compare(a, b) for _ in range(100)}
        assert answers == {True, False}  # no caching of outcomes

    def test_rejects_self_comparison_and_bad_p(self):
        truth, oracle = make()
        with pytest.raises(ValueError):
            oracle.compare(3, 3)
        with pytest.raises(ValueError):
            NoisyOracle.create(truth, 0.5, 1)

    def test_dummies_are_free_correct_and_ordered(self):
        truth, oracle = make(p=0.4)
        dummies = oracle.add_dummies(3)
        assert oracle.dummy_floor == 3
        real = 0
        for d in dummies:
            for _ in range(20):
                assert oracle.compare(int(d), real) is True
                assert oracle.compare(real, int(d)) is False
        assert oracle.calls_used() == 0
        # dummy vs dummy: consistent id order, still free
        assert oracle.compare(-2, -1) is True
        assert oracle.calls_used() == 0

    def test_charge_dummies_flag(self):
        truth, oracle = make(p=0.25)
        oracle.charge_dummies = True
        d = int(oracle.add_dummies(1)[0])
        assert oracle.compare(d, 0) is True  # still always correct
        assert oracle.calls_used() == 1
