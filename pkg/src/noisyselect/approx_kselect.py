"""Constant-probability approximate k-th element selection.

Min-of-two purifying raises both the relevant fraction and the target's
relative position beta_i = k_i / n_i; once beta_i reaches 1/8 the pool is
padded with dummy smallest elements so the target becomes the median, and
the approximate median selection finishes.  Overall failure <= 1/9 using
O((k/n) eps^-2) comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .approx_median import approx_median
from .oracle import NoisyOracle
from .primitives import q_of, sel_exact, vote_cost, vote_failure_exact_fraction

GROWTH = Fraction(3, 2)    # epsilon growth per level
SHRINK = Fraction(8, 9)    # size shrink per level
SIZE_CONST = 960
BETA_STOP = Fraction(1, 8)
FALLBACK_SEL_Q = 1.0 / 36.0

APPROX_MIN = "approx-min"
PURIFY = "purify"


@dataclass(frozen=True)
class SelectLevel:
    n_i: int
    eps_i: float
    beta_i: float


@dataclass(frozen=True)
class SelectSchedule:
    """Levels (n_i, eps_i, beta_i) for i = 0..L; level 0 echoes the input."""

    beta: float
    eps: float
    q: float
    levels: tuple

    @property
    def L(self) -> int:
        return len(self.levels) - 1


def beta_step(beta, eps, q):
    """One step of the relative-position recurrence
    (2b - b^2 - e^2) - 2q (b - b^2 - e^2); exact under Fraction inputs."""
    core = beta - beta * beta - eps * eps
    return (beta + core) - 2 * q * core


def select_schedule(n: int, k: int, eps: float, p: float,
                    scale: float = 1.0, exact: bool = False) -> SelectSchedule:
    """The purifying parameter ladder: eps_i = (3/2)^i eps,
    n_i = ceil(scale * 960 * i * (8/9)^i * (k/n) * eps^-2),
    L = min{i : beta_i >= 1/8} (L = 0 when k/n >= 1/8 already).

    The caller must have normalized the problem (k/n > 2 eps); the ladder
    asserts the invariants beta_i > 2 eps_i and beta_i <= 2^i beta at every
    level and fails loudly if either breaks.  With ``exact`` the recurrence
    runs in big rationals (q included), for property tests.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    if not 1 <= k <= n // 2:
        raise ValueError(f"k must lie in 1..n/2 (mirror first), got k={k}, n={n}")
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    beta0 = Fraction(k, n)
    eps_f = Fraction(eps)
    q = vote_failure_exact_fraction(p, 3) if exact else q_of(p)
    levels = [SelectLevel(n, eps, float(beta0))]
    if beta0 >= BETA_STOP:
        return SelectSchedule(float(beta0), eps, float(q), tuple(levels))
    if beta0 <= 2 * eps_f:
        raise ValueError(
            f"need k/n > 2 eps after normalization; got beta={float(beta0)}, "
            f"eps={eps}")
    scale_f = Fraction(scale)
    size_unit = scale_f * SIZE_CONST * beta0 / (eps_f * eps_f)
    beta = beta0 if exact else float(beta0)
    prev_eps = eps_f if exact else eps
    i = 0
    while True:
        i += 1
        eps_i = (GROWTH**i * eps_f) if exact else float(GROWTH**i * eps_f)
        beta = beta_step(beta, prev_eps, q)
        prev_eps = eps_i
        n_i = math.ceil(size_unit * i * SHRINK**i)
        if not beta > 2 * eps_i:
            raise RuntimeError(
                f"schedule invariant beta_{i} > 2 eps_{i} violated: "
                f"beta={float(beta)}, eps={float(eps_i)}")
        if not beta <= 2**i * beta0 + (0 if exact else 1e-12):
            raise RuntimeError(
                f"schedule invariant beta_{i} <= 2^{i} beta violated")
        levels.append(SelectLevel(int(n_i), float(eps_i), float(beta)))
        if beta >= BETA_STOP:
            return SelectSchedule(float(beta0), eps, float(q), tuple(levels))
        if i > 64:
            raise RuntimeError("select schedule failed to terminate")


def normalize_problem(n: int, k: int, eps: float):
    """(k, eps', mode): k <= n eps falls back to approximate minimum
    selection; n eps < k <= 2 n eps halves eps so that k > 2 n eps'."""
    if not 1 <= k <= n // 2:
        raise ValueError(f"k must lie in 1..n/2 (mirror first), got k={k}, n={n}")
    if k <= n * eps:
        return k, eps, APPROX_MIN
    if k <= 2 * n * eps:
        return k, eps / 2.0, PURIFY
    return k, eps, PURIFY


def purify_select_round(oracle: NoisyOracle, source: np.ndarray,
                        target_size: int) -> np.ndarray:
    """One purifying level: target_size outputs, each the reported minimum
    of two uniform-with-replacement draws (the 6 c_p + 1 comparison vote).

    Charges exactly target_size * (6 c_p + 1) calls on dummy-free sources.
    """
    source = np.asarray(source, dtype=np.int64)
    if target_size == 0:
        return np.empty(0, dtype=np.int64)
    if len(source) == 0:
        raise ValueError("cannot purify an empty source")
    rng = oracle.rng
    idx = rng.integers(len(source), (target_size, 2))
    ids = source[idx]
    ranks = oracle.truth.ranks_of(ids).astype(np.int64)
    first_lower = (ranks[:, 0] <= ranks[:, 1])  # ties: first draw precedes
    free = (ranks[:, 0] == 0) | (ranks[:, 1] == 0)
    fail = rng.uniforms(target_size) < oracle.vote_failure(3)
    fail &= ~free
    cost = vote_cost(oracle.p, 3)
    charged = target_size if oracle.charge_dummies else target_size - int(free.sum())
    oracle.charge(charged * cost)
    take_first = first_lower ^ fail
    return np.where(take_first, ids[:, 0], ids[:, 1])


def approx_min_fallback(oracle: NoisyOracle, items: Sequence[int],
                        eps: float) -> int:
    """Approximate minimum: the boosted minimum of ceil(3/eps) random
    samples; some sample has rank <= n eps with probability >= 1 - e^-3,
    so failure <= e^-3 + 1/36 < 1/9."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    items = np.asarray(items, dtype=np.int64)
    m = math.ceil(3.0 / eps)
    sample = items[oracle.rng.integers(len(items), m)]
    return int(sel_exact(oracle, sample.tolist(), 1, FALLBACK_SEL_Q))


def dummy_pad_params(n_L: int, beta_L: float, eps_L: float):
    """Dummy count and adjusted epsilon for the median stage: pad with
    d = n_L - 2 round(beta_L n_L) dummies so the target sits at the median
    of n_L + d elements; shrink the window by one rank unit to absorb the
    rounding residual."""
    k_L = math.floor(beta_L * n_L + 0.5)
    d = max(0, n_L - 2 * k_L)
    total = n_L + d
    eps_prime = (n_L * eps_L - 1.0) / total
    if eps_prime <= 0.0:
        raise ValueError(
            f"window collapsed: n_L * eps_L = {n_L * eps_L:.3f} <= 1 "
            "(scale factor too small for this epsilon)")
    return d, eps_prime


def approx_kselect(oracle: NoisyOracle, items: Sequence[int], k: int,
                   eps: float, scale: float = 1.0) -> int:
    """Select an element whose rank among ``items`` lies in
    (k - n eps, k + n eps], with failure probability at most 1/9."""
    items = np.asarray(items, dtype=np.int64)
    n = len(items)
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    k_eff, eps_eff, mode = normalize_problem(n, k, eps)
    if mode == APPROX_MIN:
        return approx_min_fallback(oracle, items, eps_eff)
    schedule = select_schedule(n, k_eff, eps_eff, oracle.p, scale)
    pool = items
    for level in schedule.levels[1:]:
        pool = purify_select_round(oracle, pool, level.n_i)
    last = schedule.levels[-1]
    d, eps_prime = dummy_pad_params(len(pool), last.beta_i, last.eps_i)
    padded = np.concatenate([pool, oracle.add_dummies(d)])
    result = approx_median(oracle, padded, eps_prime, scale)
    if result < 0:
        # the median stage returned a dummy (inside its failure budget);
        # fall back to a random real element
        result = int(pool[oracle.rng.integers(len(pool))])
    return result
