"""Amplifying the constant-probability selector to success 1 - Q.

Stage one draws m = ceil(2^10 * 3^2 * ln(2/Q)) independent constant-
probability selections, so that with probability 1 - Q/2 at least 7m/8 of
them are relevant.  Stage two repeatedly picks a random candidate and
majority-tests the "neither min nor max of four" experiment, treating it as
a conceptual comparison with error probability 15/32; acceptance certifies
the candidate's rank window with probability 1 - Q/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .approx_kselect import approx_kselect
from .oracle import NoisyOracle
from .primitives import NMM_VOTE_LEVEL, vote_cost
from .rng import CounterRng, derive_key

# Lemma 1's constant at the conceptual error probability 15/32:
# ceil(4 * (17/32) / (1/16)^2) = 544
C_VERIFY = 544
SAMPLE_CONST = 2**10 * 3**2  # 9216


@dataclass(frozen=True)
class TopLevelConfig:
    """Deterministic functions of the target failure probability Q."""

    Q: float
    m: int
    verify_t: int
    verify_votes: int
    round_cap: int

    @classmethod
    def from_q(cls, Q: float, round_cap: int | None = None) -> "TopLevelConfig":
        if not 0.0 < Q < 0.5:
            raise ValueError(f"Q must lie in (0, 1/2), got {Q}")
        log_term = math.log(2.0 / Q)
        verify_t = math.ceil(log_term)
        return cls(
            Q=Q,
            m=math.ceil(SAMPLE_CONST * log_term),
            verify_t=verify_t,
            verify_votes=2 * C_VERIFY * verify_t + 1,
            round_cap=round_cap if round_cap is not None
            else math.ceil(64.0 * log_term),
        )


@dataclass(frozen=True)
class SelectionOutcome:
    element: int
    rounds: int
    exhausted: bool


def nmm_experiment_batch(rng: CounterRng, g: float, x_keys: np.ndarray,
                         other_keys: np.ndarray) -> np.ndarray:
    """Vectorized "x is neither min nor max of four" experiments.

    Keys encode a strict total order (rank with tie-breaks).  Each
    experiment runs a min and a max tournament of three boosted votes each,
    every vote failing independently with probability g.  Returns one bool
    per experiment: x survived both tournaments.
    """
    count = len(x_keys)
    f = rng.uniforms((count, 6)) < g
    a = x_keys
    b, c, d = other_keys[:, 0], other_keys[:, 1], other_keys[:, 2]

    v1 = (a < b) ^ f[:, 0]
    sm1 = np.where(v1, a, b)
    sm1_is_x = v1
    v2 = (c < d) ^ f[:, 1]
    sm2 = np.where(v2, c, d)
    v3 = (sm1 < sm2) ^ f[:, 2]
    min_is_x = v3 & sm1_is_x

    v4 = (a < b) ^ f[:, 3]
    lg1 = np.where(v4, b, a)
    lg1_is_x = ~v4
    v5 = (c < d) ^ f[:, 4]
    lg2 = np.where(v5, d, c)
    v6 = (lg1 < lg2) ^ f[:, 5]
    max_is_x = ~v6 & lg1_is_x

    return ~min_is_x & ~max_is_x


def sample_keys(ranks: np.ndarray, positions: np.ndarray,
                x_position: int | None = None):
    """Strict order keys for sample positions: rank first, position as the
    consistent tie order among copies; a drawn copy of the candidate's own
    position orders just below the candidate."""
    m = len(ranks)
    keys = (ranks[positions].astype(np.int64) * (m + 1) + positions) * 2
    if x_position is None:
        return keys
    x_key = (int(ranks[x_position]) * (m + 1) + x_position) * 2 + 1
    return keys, x_key


def sample_rank(ranks: np.ndarray, position: int) -> int:
    """Rank of a sample entry within the sample, copies tie-broken by
    position (instrumentation only)."""
    r = ranks[position]
    below = int((ranks < r).sum())
    equal_before = int((ranks[: position + 1] == r).sum())
    return below + equal_before


def verify_candidate(oracle: NoisyOracle, x_position: int,
                     sample_ids: np.ndarray, cfg: TopLevelConfig) -> bool:
    """Majority of verify_votes four-element experiments, each drawing three
    fresh positions uniformly with replacement from the whole sample."""
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    m = len(sample_ids)
    ranks = oracle.truth.ranks_of(sample_ids)
    votes = cfg.verify_votes
    positions = oracle.rng.integers(m, (votes, 3))
    other_keys, x_key = sample_keys(ranks, positions, x_position)
    g = oracle.vote_failure(NMM_VOTE_LEVEL)
    passed = nmm_experiment_batch(
        oracle.rng, g, np.full(votes, x_key, dtype=np.int64), other_keys)
    oracle.charge(votes * 6 * vote_cost(oracle.p, NMM_VOTE_LEVEL))
    return int(passed.sum()) > votes // 2


def sample_stage(oracle: NoisyOracle, items: np.ndarray, k: int, eps: float,
                 cfg: TopLevelConfig, scale: float = 1.0,
                 use_kernel: bool = True) -> np.ndarray:
    """m independent constant-probability selections (ids, length cfg.m).

    The kernel path runs each selection on its own derived stream and
    charges the summed comparisons to the oracle; results are exact in
    distribution either way.
    """
    items = np.asarray(items, dtype=np.int64)
    if use_kernel:
        from ._kernels import build_kselect_plan, run_kselect_batch
        plan = build_kselect_plan(len(items), k, eps, oracle.p, scale)
        base = oracle.rng.child_key()
        keys = np.array([derive_key(base, j) for j in range(cfg.m)],
                        dtype=np.uint64)
        ranks, calls = run_kselect_batch(plan, keys)
        oracle.charge(int(calls.sum()))
        return oracle.truth.ids_of_ranks(ranks)
    return np.array(
        [approx_kselect(oracle, items, k, eps, scale) for _ in range(cfg.m)],
        dtype=np.int64)


def select_approx(oracle: NoisyOracle, items: np.ndarray, k: int, eps: float,
                  Q: float, scale: float = 1.0, use_kernel: bool = True,
                  cfg: TopLevelConfig | None = None):
    """Solve the eps-approximate k-selection with failure probability <= Q.

    Returns (element, SelectionOutcome).  If round_cap verification rounds
    all reject (probability at most (3/4)^round_cap), the last candidate is
    returned with the exhausted flag set.
    """
    items = np.asarray(items, dtype=np.int64)
    n = len(items)
    if not 1 <= k <= n // 2:
        raise ValueError(
            f"k must lie in 1..n/2 (new_universe mirrors k > n/2), got {k}")
    if cfg is None:
        cfg = TopLevelConfig.from_q(Q)
    sample = sample_stage(oracle, items, k, eps, cfg, scale, use_kernel)
    x_position = 0
    for round_no in range(1, cfg.round_cap + 1):
        x_position = oracle.rng.integers(cfg.m)
        if verify_candidate(oracle, x_position, sample, cfg):
            return int(sample[x_position]), SelectionOutcome(
                int(sample[x_position]), round_no, False)
    return int(sample[x_position]), SelectionOutcome(
        int(sample[x_position]), cfg.round_cap, True)
