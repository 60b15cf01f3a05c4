"""Numba-compiled rank-process kernels for campaign-scale simulation.

The algorithms are label-invariant: the distribution of the returned rank
depends only on (n, k, eps, p), never on the hidden permutation, so the
kernels simulate the rank process directly.  Vote outcomes are drawn from
their exact failure laws and comparisons are charged deterministically,
matching the library implementations in distribution (cross-validated in
the test suite).

Each run owns a SplitMix64 stream (key passed in, counter local), so
batches are reproducible and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .approx_kselect import (APPROX_MIN, FALLBACK_SEL_Q, dummy_pad_params,
                             normalize_problem, select_schedule)
from .approx_median import SM_SEL_Q, median_schedule, sm_sample_size
from .primitives import vote_cost, vote_failure_exact

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always", cache=True)
def _u01(key, ctr):
    ctr = ctr + _ONE
    z = key + ctr * _GOLD
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return (z >> _S11) * _INV53, ctr


@njit(inline="always", cache=True)
def _randint(key, ctr, n):
    u, ctr = _u01(key, ctr)
    i = int(u * n)
    if i >= n:
        i = n - 1
    return i, ctr


@njit(cache=True)
def stream_uniforms(key, count):
    """Probe: the first ``count`` uniforms of a kernel stream (tests only)."""
    out = np.empty(count, dtype=np.float64)
    ctr = np.uint64(0)
    for i in range(count):
        u, ctr = _u01(key, ctr)
        out[i] = u
    return out


@njit(cache=True, nogil=True)
def _noisy_merge_sort(keys, tmp, size, dummy_bound, g, cost, key, ctr, calls):
    """Bottom-up merge sort of strict-order keys with boosted comparisons.

    Keys below dummy_bound are dummies: their comparisons are free and
    always correct.  Returns (ctr, calls).
    """
    width = 1
    while width < size:
        lo = 0
        while lo < size:
            mid = lo + width
            hi = lo + 2 * width
            if mid > size:
                mid = size
            if hi > size:
                hi = size
            i = lo
            j = mid
            o = lo
            while i < mid and j < hi:
                ka = keys[i]
                kb = keys[j]
                lt = ka < kb
                if ka >= dummy_bound and kb >= dummy_bound:
                    calls += cost
                    u, ctr = _u01(key, ctr)
                    if u < g:
                        lt = not lt
                if lt:
                    tmp[o] = ka
                    i += 1
                else:
                    tmp[o] = kb
                    j += 1
                o += 1
            while i < mid:
                tmp[o] = keys[i]
                i += 1
                o += 1
            while j < hi:
                tmp[o] = keys[j]
                j += 1
                o += 1
            lo += 2 * width
        for t in range(size):
            keys[t] = tmp[t]
        width *= 2
    return ctr, calls


@njit(cache=True, nogil=True)
def _kselect_once(key, n, mode, sel_sizes, g3, cost3, d, med_sizes, g4, cost4,
                  sm_m, sm_rank, g_sm, cost_sm,
                  sel_a, sel_b, med_a, med_b, sm_keys, sm_tmp):
    """One constant-probability selection; returns (rank, calls)."""
    ctr = np.uint64(0)
    calls = 0

    if mode == 1:  # approximate-minimum fallback: boosted min of sm_m draws
        bound = sm_m + 1
        for i in range(sm_m):
            r, ctr = _randint(key, ctr, n)
            sm_keys[i] = (r + 1) * bound + i
        ctr, calls = _noisy_merge_sort(sm_keys, sm_tmp, sm_m, bound,
                                       g_sm, cost_sm, key, ctr, calls)
        return sm_keys[0] // bound, calls

    # stage 1: min-of-two purifying (sources are always real elements)
    cur = sel_a
    nxt = sel_b
    cur_size = 0
    virtual = True
    for li in range(sel_sizes.shape[0]):
        tgt = sel_sizes[li]
        for j in range(tgt):
            if virtual:
                i1, ctr = _randint(key, ctr, n)
                i2, ctr = _randint(key, ctr, n)
                r1 = i1 + 1
                r2 = i2 + 1
            else:
                i1, ctr = _randint(key, ctr, cur_size)
                i2, ctr = _randint(key, ctr, cur_size)
                r1 = cur[i1]
                r2 = cur[i2]
            lower = r1 if r1 <= r2 else r2
            upper = r2 if r1 <= r2 else r1
            u, ctr = _u01(key, ctr)
            calls += cost3
            nxt[j] = upper if u < g3 else lower
        cur, nxt = nxt, cur
        cur_size = tgt
        virtual = False

    base_size = n if virtual else cur_size
    total0 = base_size + d

    # stage 2: dummy-padded median purifying; rank 0 is a dummy
    med_cur = med_a
    med_nxt = med_b
    med_size = 0
    for li in range(med_sizes.shape[0]):
        tgt = med_sizes[li]
        for j in range(tgt):
            r0 = 0
            r1 = 0
            r2 = 0
            for c in range(3):
                if li == 0:
                    idx, ctr = _randint(key, ctr, total0)
                    if idx < d:
                        r = 0
                    elif virtual:
                        r = idx - d + 1
                    else:
                        r = cur[idx - d]
                else:
                    idx, ctr = _randint(key, ctr, med_size)
                    r = med_cur[idx]
                if c == 0:
                    r0 = r
                elif c == 1:
                    r1 = r
                else:
                    r2 = r
            # sort the triple by (rank, draw position)
            k0 = r0 * 4
            k1 = r1 * 4 + 1
            k2 = r2 * 4 + 2
            if k0 > k1:
                k0, k1 = k1, k0
            if k1 > k2:
                k1, k2 = k2, k1
            if k0 > k1:
                k0, k1 = k1, k0
            q0 = k0 // 4
            q1 = k1 // 4
            q2 = k2 // 4
            # three level-4 votes; dummy-involved votes are free + correct
            f0 = False
            if q0 != 0 and q1 != 0:
                calls += cost4
                u, ctr = _u01(key, ctr)
                f0 = u < g4
            f1 = False
            if q0 != 0 and q2 != 0:
                calls += cost4
                u, ctr = _u01(key, ctr)
                f1 = u < g4
            f2 = False
            if q1 != 0 and q2 != 0:
                calls += cost4
                u, ctr = _u01(key, ctr)
                f2 = u < g4
            pmin = (1 if f0 else 0) + (1 if f1 else 0)
            pmed = (0 if f0 else 1) + (1 if f2 else 0)
            pmax = (0 if f1 else 1) + (0 if f2 else 1)
            u, ctr = _u01(key, ctr)  # tie-break draw, consumed every output
            if pmin == 1 and pmed == 1 and pmax == 1:
                pick = int(u * 3)
                if pick >= 3:
                    pick = 2
                out = q0 if pick == 0 else (q1 if pick == 1 else q2)
            elif pmin == 1:
                out = q0
            elif pmed == 1:
                out = q1
            else:
                out = q2
            med_nxt[j] = out
        med_cur, med_nxt = med_nxt, med_cur
        med_size = tgt

    # stage 3: sample-median baseline on the final pool
    bound = sm_m + 1
    have_med = med_sizes.shape[0] > 0
    for i in range(sm_m):
        if have_med:
            idx, ctr = _randint(key, ctr, med_size)
            r = med_cur[idx]
        else:
            idx, ctr = _randint(key, ctr, total0)
            if idx < d:
                r = 0
            elif virtual:
                r = idx - d + 1
            else:
                r = cur[idx - d]
        sm_keys[i] = r * bound + i
    ctr, calls = _noisy_merge_sort(sm_keys, sm_tmp, sm_m, bound,
                                   g_sm, cost_sm, key, ctr, calls)
    rank = sm_keys[sm_rank - 1] // bound
    if rank == 0:
        # the baseline picked a dummy: return a random real element instead
        if virtual:
            idx, ctr = _randint(key, ctr, n)
            rank = idx + 1
        else:
            idx, ctr = _randint(key, ctr, cur_size)
            rank = cur[idx]
    return rank, calls


@njit(cache=True, nogil=True)
def _run_batch(keys, n, mode, sel_sizes, g3, cost3, d, med_sizes, g4, cost4,
               sm_m, sm_rank, g_sm, cost_sm, out_ranks, out_calls):
    max_sel = 1
    for i in range(sel_sizes.shape[0]):
        if sel_sizes[i] > max_sel:
            max_sel = sel_sizes[i]
    max_med = 1
    for i in range(med_sizes.shape[0]):
        if med_sizes[i] > max_med:
            max_med = med_sizes[i]
    sel_a = np.empty(max_sel, dtype=np.int64)
    sel_b = np.empty(max_sel, dtype=np.int64)
    med_a = np.empty(max_med, dtype=np.int64)
    med_b = np.empty(max_med, dtype=np.int64)
    sm_keys = np.empty(sm_m, dtype=np.int64)
    sm_tmp = np.empty(sm_m, dtype=np.int64)
    for j in range(keys.shape[0]):
        rank, calls = _kselect_once(
            keys[j], n, mode, sel_sizes, g3, cost3, d, med_sizes, g4, cost4,
            sm_m, sm_rank, g_sm, cost_sm,
            sel_a, sel_b, med_a, med_b, sm_keys, sm_tmp)
        out_ranks[j] = rank
        out_calls[j] = calls


def _sort_vote_level(m: int, Q: float) -> int:
    """Vote level for the boosted merge sort: per-vote failure
    Q / (m ceil(log2 m) + 1) union-bounds to total failure <= Q."""
    if m <= 1:
        return 1
    delta = Q / (m * math.ceil(math.log2(m)) + 1)
    return max(1, math.ceil(math.log(1.0 / delta)))


@dataclass(frozen=True)
class KselectPlan:
    """Precomputed deterministic parameters of one kselect configuration."""

    n: int
    p: float
    mode: int  # 0 = purify + median, 1 = approx-min fallback
    sel_sizes: np.ndarray
    g3: float
    cost3: int
    d: int
    med_sizes: np.ndarray
    g4: float
    cost4: int
    sm_m: int
    sm_rank: int
    g_sm: float
    cost_sm: int
    eps_prime: float = 0.0  # median-stage epsilon (diagnostics)


def build_kselect_plan(n: int, k: int, eps: float, p: float,
                       scale: float = 1.0) -> KselectPlan:
    """Flatten normalization + schedules + vote parameters for the kernel."""
    empty = np.empty(0, dtype=np.int64)
    k_eff, eps_eff, mode = normalize_problem(n, k, eps)
    if mode == APPROX_MIN:
        fb_m = math.ceil(3.0 / eps_eff)
        t = _sort_vote_level(fb_m, FALLBACK_SEL_Q)
        return KselectPlan(
            n=n, p=p, mode=1, sel_sizes=empty, g3=0.0, cost3=0, d=0,
            med_sizes=empty, g4=0.0, cost4=0,
            sm_m=fb_m, sm_rank=1,
            g_sm=vote_failure_exact(p, t), cost_sm=vote_cost(p, t))
    sched = select_schedule(n, k_eff, eps_eff, p, scale)
    sel_sizes = np.array([lv.n_i for lv in sched.levels[1:]], dtype=np.int64)
    last = sched.levels[-1]
    n_last = last.n_i if sched.L >= 1 else n
    d, eps_prime = dummy_pad_params(n_last, last.beta_i, last.eps_i)
    med = median_schedule(n_last + d, eps_prime, scale)
    med_sizes = np.array([lv.n_i for lv in med.levels[1:]], dtype=np.int64)
    sm_m = sm_sample_size(med.final_eps)
    t_sm = _sort_vote_level(sm_m, SM_SEL_Q)
    return KselectPlan(
        n=n, p=p, mode=0, sel_sizes=sel_sizes,
        g3=vote_failure_exact(p, 3), cost3=vote_cost(p, 3),
        d=d, med_sizes=med_sizes,
        g4=vote_failure_exact(p, 4), cost4=vote_cost(p, 4),
        sm_m=sm_m, sm_rank=(sm_m + 1) // 2,
        g_sm=vote_failure_exact(p, t_sm), cost_sm=vote_cost(p, t_sm),
        eps_prime=eps_prime)


def build_median_plan(n: int, eps: float, p: float,
                      scale: float = 1.0) -> KselectPlan:
    """Plan for a bare approximate-median run (no select stage, no dummies)."""
    empty = np.empty(0, dtype=np.int64)
    med = median_schedule(n, eps, scale)
    med_sizes = np.array([lv.n_i for lv in med.levels[1:]], dtype=np.int64)
    sm_m = sm_sample_size(med.final_eps)
    t_sm = _sort_vote_level(sm_m, SM_SEL_Q)
    return KselectPlan(
        n=n, p=p, mode=0, sel_sizes=empty, g3=0.0, cost3=0, d=0,
        med_sizes=med_sizes,
        g4=vote_failure_exact(p, 4), cost4=vote_cost(p, 4),
        sm_m=sm_m, sm_rank=(sm_m + 1) // 2,
        g_sm=vote_failure_exact(p, t_sm), cost_sm=vote_cost(p, t_sm),
        eps_prime=eps)


def run_kselect_batch(plan: KselectPlan, keys: np.ndarray):
    """Run one selection per key; returns (ranks, calls) arrays."""
    keys = np.asarray(keys, dtype=np.uint64)
    out_ranks = np.empty(len(keys), dtype=np.int64)
    out_calls = np.empty(len(keys), dtype=np.int64)
    _run_batch(keys, plan.n, plan.mode, plan.sel_sizes, plan.g3, plan.cost3,
               plan.d, plan.med_sizes, plan.g4, plan.cost4,
               plan.sm_m, plan.sm_rank, plan.g_sm, plan.cost_sm,
               out_ranks, out_calls)
    return out_ranks, out_calls
