"""Constant-probability approximate median selection in O(eps^-2) comparisons.

The population is purified level by level: each level resamples
median-of-three triples, raising the relevant fraction while the window
epsilon grows by 5/4 per level, until it reaches 1/6 and a straightforward
sample-median baseline finishes the job.  Overall failure <= 1/18.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .oracle import NoisyOracle
from .primitives import sel_exact, vote_cost

GROWTH = Fraction(5, 4)          # epsilon growth per level
SHRINK_SQ = Fraction(4, 5) ** 2  # size shrink per level
SIZE_CONST = 2000
THRESHOLD = Fraction(1, 6)       # purify until eps_i >= 1/6
SM_FACTOR = Fraction(5, 2)       # sample size 2.5 eps^-2 (Hoeffding, 1/72/side)
SM_SEL_Q = 1.0 / 72.0


@dataclass(frozen=True)
class MedianLevel:
    n_i: int
    eps_i: float


@dataclass(frozen=True)
class MedianSchedule:
    """Purifying levels (n_i, eps_i) for i = 0..L; level 0 echoes the input."""

    eps: float
    levels: tuple
    threshold: float = float(THRESHOLD)

    @property
    def L(self) -> int:
        return len(self.levels) - 1

    @property
    def final_eps(self) -> float:
        return self.levels[-1].eps_i


def median_schedule(n: int, eps: float, scale: float = 1.0) -> MedianSchedule:
    """The exact level sequence: eps_i = (5/4)^i eps,
    n_i = ceil(scale * 2000 * i * (4/5)^(2i) * eps^-2),
    L = min{i : eps_i >= 1/6}.

    All arithmetic is exact rational on the binary values of eps and scale,
    with the ceiling applied last.  eps >= 1/6 gives the empty schedule
    (L = 0); eps outside (0, 1/2) is rejected.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    eps_f = Fraction(eps)
    scale_f = Fraction(scale)
    levels = [MedianLevel(n, eps)]
    if eps_f >= THRESHOLD:
        return MedianSchedule(eps, tuple(levels))
    inv_eps_sq = 1 / (eps_f * eps_f)
    i = 0
    while True:
        i += 1
        eps_i = GROWTH**i * eps_f
        n_i = math.ceil(scale_f * SIZE_CONST * i * SHRINK_SQ**i * inv_eps_sq)
        levels.append(MedianLevel(int(n_i), float(eps_i)))
        if eps_i >= THRESHOLD:
            return MedianSchedule(eps, tuple(levels))


def purify_median_round(oracle: NoisyOracle, source: np.ndarray,
                        target_size: int) -> np.ndarray:
    """One purifying level: target_size outputs, each the reported median of
    three uniform-with-replacement draws from source.

    Charges exactly target_size * 3 * (8 c_p + 1) calls when the source is
    dummy-free; votes touching a dummy are free.
    """
    source = np.asarray(source, dtype=np.int64)
    if target_size == 0:
        return np.empty(0, dtype=np.int64)
    if len(source) == 0:
        raise ValueError("cannot purify an empty source")
    rng = oracle.rng
    idx = rng.integers(len(source), (target_size, 3))
    ids = source[idx]
    ranks = oracle.truth.ranks_of(ids).astype(np.int64)
    # order each triple by (rank, draw position): copies break ties by position
    key = ranks * 4 + np.arange(3, dtype=np.int64)
    order = np.argsort(key, axis=1)
    sids = np.take_along_axis(ids, order, axis=1)
    sranks = np.take_along_axis(ranks, order, axis=1)

    g = oracle.vote_failure(4)
    fail = rng.uniforms((target_size, 3)) < g
    dummy = sranks == 0
    free = np.empty_like(fail)
    free[:, 0] = dummy[:, 0] | dummy[:, 1]  # vote (min, med)
    free[:, 1] = dummy[:, 0] | dummy[:, 2]  # vote (min, max)
    free[:, 2] = dummy[:, 1] | dummy[:, 2]  # vote (med, max)
    fail &= ~free

    cost = vote_cost(oracle.p, 4)
    charged = free.size - int(free.sum()) if not oracle.charge_dummies else free.size
    oracle.charge(charged * cost)

    f = fail.astype(np.int64)
    pts_min = f[:, 0] + f[:, 1]
    pts_med = (1 - f[:, 0]) + f[:, 2]
    pts_max = (1 - f[:, 1]) + (1 - f[:, 2])
    winner = ((pts_med == 1).astype(np.int64)
              + 2 * (pts_max == 1).astype(np.int64))
    winner[pts_min == 1] = 0
    tie = (pts_min == 1) & (pts_med == 1) & (pts_max == 1)
    tie_pick = rng.integers(3, target_size)
    winner = np.where(tie, tie_pick, winner)
    return np.take_along_axis(sids, winner[:, None], axis=1)[:, 0]


def sm_sample_size(eps: float) -> int:
    """Smallest odd integer >= 2.5 eps^-2 (odd avoids median ties)."""
    m = math.ceil(SM_FACTOR / Fraction(eps) ** 2)
    return m if m % 2 else m + 1


def sm_baseline(oracle: NoisyOracle, items: Sequence[int], eps: float) -> int:
    """The straightforward method: sample Theta(eps^-2) elements with
    replacement and return the boosted-selection median of the sample.
    Failure <= 1/36 (1/72 sampling + 1/72 selection)."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    items = np.asarray(items, dtype=np.int64)
    m = sm_sample_size(eps)
    sample = items[oracle.rng.integers(len(items), m)]
    return int(sel_exact(oracle, sample.tolist(), (m + 1) // 2, SM_SEL_Q))


def approx_median(oracle: NoisyOracle, items: Sequence[int], eps: float,
                  scale: float = 1.0) -> int:
    """Select an element whose rank among ``items`` lies within n*eps of the
    median, with failure probability at most 1/18."""
    items = np.asarray(items, dtype=np.int64)
    schedule = median_schedule(len(items), eps, scale)
    pool = items
    for level in schedule.levels[1:]:
        pool = purify_median_round(oracle, pool, level.n_i)
    return sm_baseline(oracle, pool, schedule.final_eps)
