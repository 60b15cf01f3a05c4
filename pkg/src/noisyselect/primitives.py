"""Constant-size noisy building blocks built on majority voting.

A level-t majority vote repeats one comparison 2*c_p*t + 1 times and takes
the majority, failing with probability at most e^-t.  Vote outcomes here are
sampled directly from their exact failure law (the binomial tail below) with
the full comparison count charged to the oracle; this is distributionally
identical to materializing each raw comparison and is what makes
campaign-scale simulation affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .bounds import binom_tail_leq, binom_tail_leq_fraction
from .oracle import NoisyOracle


def c_of(p) -> int:
    """The vote-width constant ceil(4 (1-p) / (1-2p)^2), exactly.

    Floats are taken at the decimal value they print as (so 0.4 means 2/5,
    not its binary neighbour, keeping the ceiling where hand arithmetic
    puts it); Fractions are used directly.
    """
    pf = p if isinstance(p, Fraction) else Fraction(str(float(p)))
    if not 0 <= pf < Fraction(1, 2):
        raise ValueError(f"p must lie in [0, 1/2), got {p}")
    expr = 4 * (1 - pf) / (1 - 2 * pf) ** 2
    return int(math.ceil(expr))


@dataclass(frozen=True)
class VoteParams:
    """Parameters of one boosted comparison."""

    p: float
    c_p: int
    t: int

    @property
    def votes(self) -> int:
        return 2 * self.c_p * self.t + 1

    @classmethod
    def for_p(cls, p: float, t: int) -> "VoteParams":
        if t < 1:
            raise ValueError(f"t must be >= 1, got {t}")
        return cls(p=p, c_p=c_of(p), t=t)


def vote_failure_exact(p: float, t: int) -> float:
    """Exact failure probability of a level-t majority vote:
    sum_{i=0}^{c_p t} C(2 c_p t + 1, i) (1-p)^i p^(2 c_p t + 1 - i),
    computed in log space.  Always <= e^-t."""
    params = VoteParams.for_p(p, t)
    if p == 0.0:
        return 0.0
    return binom_tail_leq(params.votes, 1.0 - p, params.c_p * t)


def vote_failure_exact_fraction(p, t: int) -> Fraction:
    """Big-rational twin of vote_failure_exact (the oracle of the oracle)."""
    pf = p if isinstance(p, Fraction) else Fraction(str(float(p)))
    c = c_of(pf)
    votes = 2 * c * t + 1
    return binom_tail_leq_fraction(votes, 1 - pf, c * t)


def vote_cost(p: float, t: int) -> int:
    return VoteParams.for_p(p, t).votes


def majority_compare(oracle: NoisyOracle, x: int, y: int, t: int) -> bool:
    """Boosted comparison: True means "x precedes y".

    Charges exactly 2 c_p t + 1 calls; the outcome is wrong with probability
    exactly vote_failure_exact(p, t), independent across invocations.
    Dummy-involved votes are answered correctly (cost per oracle policy).
    """
    cost = vote_cost(oracle.p, t)
    lt = oracle.true_less(x, y)
    if oracle.is_dummy(x) or oracle.is_dummy(y):
        if oracle.charge_dummies:
            oracle.charge(cost)
        return lt
    oracle.charge(cost)
    if oracle.rng.uniform() < oracle.vote_failure(t):
        return not lt
    return lt


def majority_compare_literal(oracle: NoisyOracle, x: int, y: int, t: int) -> bool:
    """Reference implementation looping raw comparisons; used by tests to
    cross-validate the sampled-vote path."""
    cost = vote_cost(oracle.p, t)
    firsts = oracle.repeat_compare(x, y, cost)
    return firsts > cost // 2


def min_of_two(oracle: NoisyOracle, x: int, y: int) -> int:
    """Minimum of two via the 6 c_p + 1 comparison (level-3) vote."""
    return x if majority_compare(oracle, x, y, 3) else y


def q_of(p: float) -> float:
    """Failure probability of min_of_two; < 1/20 for every p in [0, 1/2)."""
    return vote_failure_exact(p, 3)


def median_of_three(oracle: NoisyOracle, x: int, y: int, z: int) -> int:
    """Symmetric median selection on three distinct ids.

    Each pair is compared with a level-4 vote and the reported-larger
    element scores a point; the element with exactly one point wins, and a
    three-way tie is broken uniformly.  Returns the true median with
    probability >= 12/13 and the minimum/maximum with identical
    probabilities (4/3) g (1-g), g the level-4 vote failure.
    """
    if len({x, y, z}) != 3:
        raise ValueError("median_of_three requires three distinct ids")
    points = {x: 0, y: 0, z: 0}
    points[y if majority_compare(oracle, x, y, 4) else x] += 1
    points[z if majority_compare(oracle, x, z, 4) else x] += 1
    points[z if majority_compare(oracle, y, z, 4) else y] += 1
    winners = [e for e in (x, y, z) if points[e] == 1]
    if len(winners) == 1:
        return winners[0]
    return winners[oracle.rng.integers(3)]


def median_of_three_distribution(g):
    """Exact return distribution (p_min, p_median, p_max) of the
    median-of-three rule when each vote fails independently w.p. g.

    Enumerates the eight vote-outcome patterns; works with float or
    Fraction, so symmetry can be asserted exactly.
    """
    zero = g * 0
    probs = [zero, zero, zero]  # min, median, max
    for f1 in (False, True):          # vote (min, med); point to med if ok
        for f2 in (False, True):      # vote (min, max); point to max if ok
            for f3 in (False, True):  # vote (med, max); point to max if ok
                w = ((g if f1 else 1 - g) * (g if f2 else 1 - g)
                     * (g if f3 else 1 - g))
                pts = [0, 0, 0]
                pts[0 if f1 else 1] += 1
                pts[0 if f2 else 2] += 1
                pts[1 if f3 else 2] += 1
                ones = [i for i in range(3) if pts[i] == 1]
                if len(ones) == 1:
                    probs[ones[0]] = probs[ones[0]] + w
                else:
                    share = w / 3
                    for i in range(3):
                        probs[i] = probs[i] + share
    return tuple(probs)


def sel_exact(oracle: NoisyOracle, items: Sequence[int], r: int, Q: float) -> int:
    """The r-th smallest of items with failure probability at most Q.

    Boosted sorting: a bottom-up merge sort whose every comparison is a
    majority vote at per-vote failure Q / (m ceil(log2 m) + 1); a union
    bound over at most that many comparisons gives total failure <= Q.
    Items may repeat (copies tie-break by position).
    """
    m = len(items)
    if not 1 <= r <= m:
        raise ValueError(f"rank {r} outside 1..{m}")
    if not 0.0 < Q < 0.5:
        raise ValueError(f"Q must lie in (0, 1/2), got {Q}")
    if m == 1:
        return items[0]
    delta = Q / (m * math.ceil(math.log2(m)) + 1)
    t = max(1, math.ceil(math.log(1.0 / delta)))
    order = _boosted_merge_sort(oracle, items, t)
    return items[order[r - 1]]


def _boosted_merge_sort(oracle: NoisyOracle, items: Sequence[int], t: int):
    """Positions of items in reported ascending order; votes at level t.
    Copies (equal underlying rank) order by position."""
    ranks = [oracle.truth.rank_of_id(e) for e in items]
    cost = vote_cost(oracle.p, t)

    def noisy_less(i: int, j: int) -> bool:
        free = ranks[i] == 0 or ranks[j] == 0
        lt = (ranks[i], i) < (ranks[j], j)
        if free:
            if oracle.charge_dummies:
                oracle.charge(cost)
            return lt
        oracle.charge(cost)
        if oracle.rng.uniform() < oracle.vote_failure(t):
            return not lt
        return lt

    runs = [[i] for i in range(len(items))]
    while len(runs) > 1:
        merged = []
        for a in range(0, len(runs) - 1, 2):
            left, right = runs[a], runs[a + 1]
            out = []
            i = j = 0
            while i < len(left) and j < len(right):
                if noisy_less(left[i], right[j]):
                    out.append(left[i]); i += 1
                else:
                    out.append(right[j]); j += 1
            out.extend(left[i:])
            out.extend(right[j:])
            merged.append(out)
        if len(runs) % 2:
            merged.append(runs[-1])
        runs = merged
    return runs[0]


NMM_VOTE_LEVEL = 5  # ceil(ln 108): per-comparison failure <= 1/108


def neither_min_nor_max(oracle: NoisyOracle, x: int, others: Sequence[int]) -> bool:
    """Check that x is neither the smallest nor the largest of four
    distinct elements, via two three-comparison tournaments whose votes are
    boosted to failure <= 1/108 each (so each tournament errs w.p. <= 1/36
    and the joint check succeeds w.p. >= 17/18)."""
    if len(others) != 3 or len({x, *others}) != 4:
        raise ValueError("need x plus three distinct other ids")
    o1, o2, o3 = others
    t = NMM_VOTE_LEVEL

    s1 = x if majority_compare(oracle, x, o1, t) else o1
    s2 = o2 if majority_compare(oracle, o2, o3, t) else o3
    reported_min = s1 if majority_compare(oracle, s1, s2, t) else s2

    l1 = o1 if majority_compare(oracle, x, o1, t) else x
    l2 = o3 if majority_compare(oracle, o2, o3, t) else o2
    reported_max = l2 if majority_compare(oracle, l1, l2, t) else l1

    return reported_min != x and reported_max != x
