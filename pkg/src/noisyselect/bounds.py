"""Exact-probability engines and numeric verification of the tail bounds.

Two tiers of arithmetic back every quantity: log-gamma floating point for
speed, and big-rational ``fractions.Fraction`` for ground truth on small
instances.  The sweep functions exhaustively check the hypergeometric
lower-bound theorems on integer grids and report any counterexample; a
precondition violation is reported as "not applicable", never as a failed
bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

# sqrt(pi/320) * e^-24, the absolute constant of the hypergeometric
# first-tail theorem
ETA = math.sqrt(math.pi / 320.0) * math.exp(-24.0)

_LOG_ETA = 0.5 * math.log(math.pi / 320.0) - 24.0


# ---------------------------------------------------------------------------
# binomial helpers
# ---------------------------------------------------------------------------

def log_binom(n: int, k) -> np.ndarray:
    """log C(n, k), vectorized over k."""
    k = np.asarray(k, dtype=np.float64)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def binom_tail_leq(n: int, p: float, k: int) -> float:
    """P[Binomial(n, p) <= k], summed in log space."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    i = np.arange(0, k + 1)
    logs = log_binom(n, i) + i * math.log(p) + (n - i) * math.log1p(-p)
    m = logs.max()
    return float(math.exp(m) * math.fsum(np.exp(logs - m)))


def binom_tail_geq(n: int, p: float, k: int) -> float:
    """P[Binomial(n, p) >= k], summed in log space from the k..n side."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    i = np.arange(k, n + 1)
    logs = log_binom(n, i) + i * math.log(p) + (n - i) * math.log1p(-p)
    m = logs.max()
    return float(math.exp(m) * math.fsum(np.exp(logs - m)))


def binom_tail_leq_fraction(n: int, p: Fraction, k: int) -> Fraction:
    """Exact P[Binomial(n, p) <= k] as a rational number."""
    p = Fraction(p)
    q = 1 - p
    total = Fraction(0)
    for i in range(0, min(k, n) + 1):
        total += math.comb(n, i) * p**i * q ** (n - i)
    return total


# ---------------------------------------------------------------------------
# KL divergence
# ---------------------------------------------------------------------------

def kl_div(a: float, b: float) -> float:
    """Kullback-Leibler divergence a ln(a/b) + (1-a) ln((1-a)/(1-b)).

    Both arguments must lie strictly inside (0, 1).
    """
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError(f"kl_div requires a, b in (0, 1); got a={a}, b={b}")
    return a * math.log(a / b) + (1.0 - a) * math.log((1.0 - a) / (1.0 - b))


def kl_quadratic_bound(a: float, y: float) -> float:
    """Upper bound 2 y^2 / (a (1-a)) on D(a || a+y) for y in [-a/2, (1-a)/2]."""
    if not (-a / 2.0 <= y <= (1.0 - a) / 2.0):
        raise ValueError("y outside the admissible interval")
    return 2.0 * y * y / (a * (1.0 - a))


# ---------------------------------------------------------------------------
# hypergeometric distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperSpec:
    """One hypergeometric instance: M balls, K black, m draws, threshold l.

    ``l`` may be a non-integral real for tail bounds; the point-mass bound
    requires it integral.
    """

    M: int
    K: int
    m: int
    l: float

    def __post_init__(self):
        if not (self.M >= 1 and 0 <= self.K <= self.M and 0 <= self.m <= self.M):
            raise ValueError(f"invalid hypergeometric instance {self}")

    @property
    def a(self) -> float:
        return self.l / self.m

    @property
    def b(self) -> float:
        return self.K / self.M

    @property
    def x(self) -> float:
        return self.m / self.M

    @property
    def support_min(self) -> int:
        return max(0, self.m - (self.M - self.K))

    @property
    def support_max(self) -> int:
        return min(self.m, self.K)


@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking exact_value >= bound_value for one instance.

    ``applicable`` is False when the theorem's preconditions fail, in which
    case ``violations`` names them and ``holds`` is vacuously True (a sweep
    must distinguish "bound fails" from "theorem does not apply").
    """

    spec: HyperSpec
    exact_value: float
    bound_value: float
    holds: bool
    slack: float
    applicable: bool = True
    violations: tuple = ()


def _log_pmf(M: int, K: int, m: int, l: int) -> float:
    return float(
        log_binom(K, l)
        + log_binom(M - K, m - l)
        - log_binom(M, m)
    )


def hyper_pmf(spec: HyperSpec) -> float:
    """P[X = l] for X ~ Hyper(M, K, m); 0 outside the support."""
    l = spec.l
    if l != int(l):
        return 0.0
    l = int(l)
    if l < spec.support_min or l > spec.support_max:
        return 0.0
    return math.exp(_log_pmf(spec.M, spec.K, spec.m, l))


def hyper_pmf_fraction(M: int, K: int, m: int, l: int) -> Fraction:
    """Exact rational pmf, the oracle for the log-gamma path (small M)."""
    if l < max(0, m - (M - K)) or l > min(m, K):
        return Fraction(0)
    return Fraction(math.comb(K, l) * math.comb(M - K, m - l), math.comb(M, m))


_LG_CACHE: dict = {}


def _lg_table(M: int) -> np.ndarray:
    """gammaln(0..M+1), so table[i] = ln((i-1)!)."""
    tab = _LG_CACHE.get(M)
    if tab is None:
        tab = gammaln(np.arange(M + 2, dtype=np.float64))
        if len(_LG_CACHE) > 64:
            _LG_CACHE.clear()
        _LG_CACHE[M] = tab
    return tab


def _log_pmf_support(M: int, K: int, m: int):
    """(support indices j, log pmf at j) for Hyper(M, K, m)."""
    lg = _lg_table(M)
    j = np.arange(max(0, m - (M - K)), min(m, K) + 1)
    logpmf = (lg[K + 1] - lg[j + 1] - lg[K - j + 1]
              + lg[M - K + 1] - lg[m - j + 1] - lg[M - K - m + j + 1]
              - (lg[M + 1] - lg[m + 1] - lg[M - m + 1]))
    return j, logpmf


def hyper_tails_all(M: int, K: int, m: int) -> np.ndarray:
    """P[X >= r] for every r = 0..m+1, accumulated from the small tail."""
    j, logpmf = _log_pmf_support(M, K, m)
    pmf = np.exp(logpmf)
    rev = np.cumsum(pmf[::-1])[::-1]  # rev[i] = sum over support[t >= i]
    tails = np.zeros(m + 2, dtype=np.float64)
    lo = int(j[0])
    hi = int(j[-1])
    tails[: lo + 1] = rev[0]
    tails[lo: hi + 1] = rev
    # (ranks above the support keep 0)
    np.minimum(tails, 1.0, out=tails)
    return tails


def hyper_tail(spec: HyperSpec) -> float:
    """P[X >= l], accumulated from the numerically smaller tail."""
    lo = spec.support_min
    hi = spec.support_max
    l_eff = math.ceil(spec.l)
    if l_eff <= lo:
        return 1.0
    if l_eff > hi:
        return 0.0
    j, logpmf = _log_pmf_support(spec.M, spec.K, spec.m)
    upper = (j >= l_eff)
    if upper.sum() <= (~upper).sum():
        return float(math.fsum(np.exp(logpmf[upper])))
    return float(1.0 - math.fsum(np.exp(logpmf[~upper])))


def hyper_tail_fraction(M: int, K: int, m: int, l: int) -> Fraction:
    total = Fraction(0)
    for j in range(max(l, max(0, m - (M - K))), min(m, K) + 1):
        total += hyper_pmf_fraction(M, K, m, j)
    return total


# ---------------------------------------------------------------------------
# the three appendix lower bounds
# ---------------------------------------------------------------------------

def _report(spec, exact, bound, violations, log_space=False):
    if violations:
        return BoundReport(spec, exact, bound, True, float("nan"), False,
                           tuple(violations))
    if log_space:
        holds = exact >= bound  # both values are logs
        return BoundReport(spec, exact, bound, bool(holds),
                           float(exact - bound), True)
    return BoundReport(spec, exact, bound, bool(exact >= bound),
                       float(exact - bound), True)


def tail_lower_bound(spec: HyperSpec) -> BoundReport:
    """Check P[X >= l] >= sqrt(pi/320) e^-24 exp(-6 (a-b)^2 m / (b(1-b))).

    Preconditions: a <= (8/5) b, (1-a) <= 2 (1-b), x <= 1/4,
    m a (1-a) >= 4, l < K, m - l < M - K.
    """
    a, b, x, m = spec.a, spec.b, spec.x, spec.m
    violations = []
    if not a <= 1.6 * b + 1e-15:
        violations.append("a <= (8/5) b")
    if not (1.0 - a) <= 2.0 * (1.0 - b) + 1e-15:
        violations.append("(1-a) <= 2 (1-b)")
    if not x <= 0.25 + 1e-15:
        violations.append("x <= 1/4")
    if not m * a * (1.0 - a) >= 4.0 - 1e-12:
        violations.append("m a (1-a) >= 4")
    if not spec.l < spec.K:
        violations.append("l < K")
    if not m - spec.l < spec.M - spec.K:
        violations.append("m - l < M - K")
    if violations:
        return _report(spec, float("nan"), float("nan"), violations)
    exact = hyper_tail(spec)
    bound = ETA * math.exp(-6.0 * (a - b) ** 2 * m / (b * (1.0 - b)))
    return _report(spec, exact, bound, [])


def pointmass_lower_bound(spec: HyperSpec) -> BoundReport:
    """Check P[X = l] >= sqrt(pi/32) sqrt((1-x)/(m a (1-a))) e^-F with
    F = (D(a||b) + x/(1-x) * (a-b)^2 / (2 (b-ax)((1-b)-(1-a)x))) m.

    Requires integral 0 < l < m (the prefactor degenerates at the edges),
    l < K and m - l < M - K.
    """
    violations = []
    if spec.l != int(spec.l):
        violations.append("l integral")
    l = int(spec.l)
    if not 0 < l < spec.m:
        violations.append("0 < l < m")
    if not l < spec.K:
        violations.append("l < K")
    if not spec.m - l < spec.M - spec.K:
        violations.append("m - l < M - K")
    if violations:
        return _report(spec, float("nan"), float("nan"), violations)
    a, b, x, m = spec.a, spec.b, spec.x, spec.m
    log_exact = _log_pmf(spec.M, spec.K, spec.m, l)
    F = (kl_div(a, b)
         + (x / (1.0 - x)) * (a - b) ** 2
         / (2.0 * (b - a * x) * ((1.0 - b) - (1.0 - a) * x))) * m
    log_bound = (0.5 * math.log(math.pi / 32.0)
                 + 0.5 * (math.log1p(-x) - math.log(m * a * (1.0 - a)))
                 - F)
    return _report(spec, log_exact, log_bound, [], log_space=True)


def cor_c2_lower_bound(spec: HyperSpec) -> BoundReport:
    """Check P[X = l] >= sqrt(pi / (64 m a (1-a))) e^{-3 (a-b)^2 m / (b(1-b))}.

    Requires integral 0 < l < m with a <= 2b, (1-a) <= 2(1-b), x <= 1/4.
    """
    violations = []
    if spec.l != int(spec.l):
        violations.append("l integral")
    l = int(spec.l)
    if not 0 < l < spec.m:
        violations.append("0 < l < m")
    a, b, x, m = spec.a, spec.b, spec.x, spec.m
    if not a <= 2.0 * b + 1e-15:
        violations.append("a <= 2b")
    if not (1.0 - a) <= 2.0 * (1.0 - b) + 1e-15:
        violations.append("(1-a) <= 2(1-b)")
    if not x <= 0.25 + 1e-15:
        violations.append("x <= 1/4")
    if violations:
        return _report(spec, float("nan"), float("nan"), violations)
    log_exact = _log_pmf(spec.M, spec.K, spec.m, l)
    log_bound = (0.5 * math.log(math.pi / (64.0 * m * a * (1.0 - a)))
                 - 3.0 * (a - b) ** 2 * m / (b * (1.0 - b)))
    return _report(spec, log_exact, log_bound, [], log_space=True)


# ---------------------------------------------------------------------------
# the sampling lemma
# ---------------------------------------------------------------------------

def _class_counts(n: int, k: int, eps: float):
    """Element counts of the small and small-or-relevant rank classes."""
    n_small = math.floor(k - n * eps + 1e-9)
    n_small_rel = math.floor(k + n * eps + 1e-9)
    return n_small, n_small_rel


def not_relevant_probability(n: int, k: int, eps: float, m_draw: int,
                             r: int) -> float:
    """Exact probability that the r-th smallest of m_draw no-replacement
    draws from an n-element universe is not relevant for (k, eps)."""
    n_small, n_small_rel = _class_counts(n, k, eps)
    p_small = hyper_tail(HyperSpec(n, n_small, m_draw, r))
    p_large = 1.0 - hyper_tail(HyperSpec(n, n_small_rel, m_draw, r))
    return p_small + p_large


def sampling_lemma_check(n: int, k: int, eps: float, m_draw: int) -> BoundReport:
    """Check min_r P[r-th smallest of the sample not relevant]
    >= eta * exp(-24 (n/k) eps^2 m_draw).

    Preconditions: m_draw <= n/4, m_draw * (k/n) >= 8, 1/2 >= k/n >= 4 eps.
    """
    beta = k / n
    spec = HyperSpec(n, _class_counts(n, k, eps)[0], m_draw, 1)
    violations = []
    if not m_draw <= n / 4:
        violations.append("m <= n/4")
    if not m_draw * beta >= 8.0 - 1e-12:
        violations.append("m beta >= 8")
    if not 4.0 * eps <= beta <= 0.5 + 1e-15:
        violations.append("1/2 >= beta >= 4 eps")
    if violations:
        return _report(spec, float("nan"), float("nan"), violations)
    n_small, n_small_rel = _class_counts(n, k, eps)
    r = np.arange(1, m_draw + 1)
    p_small = hyper_tails_all(n, n_small, m_draw)[r]
    p_large = 1.0 - hyper_tails_all(n, n_small_rel, m_draw)[r]
    exact = float((p_small + p_large).min())
    bound = ETA * math.exp(-24.0 * (n / k) * eps * eps * m_draw)
    return _report(spec, exact, bound, [])


def lem_sampling_check(n: int, k: int, eps: float, m_draw: int):
    """Check both parts of the sampling lemma for every admissible rank:
    part 1, the r-th smallest (r <= ceil(beta m)) is small, and part 2, the
    r-th largest (r <= ceil((1-beta) m)) is large, each with probability at
    least eta * exp(-12 eps^2 m / (beta (1-beta))).

    Returns (holds, worst_slack) over all ranks, or (True, nan) when the
    preconditions fail.
    """
    beta = k / n
    if not (m_draw <= n / 4 and m_draw * beta >= 8.0 - 1e-12
            and 4.0 * eps <= beta <= 0.5 + 1e-15):
        return True, float("nan")
    n_small, n_small_rel = _class_counts(n, k, eps)
    bound = ETA * math.exp(-12.0 * eps * eps * m_draw / (beta * (1.0 - beta)))
    r1 = np.arange(1, math.ceil(beta * m_draw) + 1)
    p_small = hyper_tails_all(n, n_small, m_draw)[r1]
    r2 = np.arange(1, math.ceil((1.0 - beta) * m_draw) + 1)
    p_large = hyper_tails_all(n, n - n_small_rel, m_draw)[r2]
    worst = float(min(p_small.min(), p_large.min()) - bound)
    return worst >= 0.0, worst


# ---------------------------------------------------------------------------
# Chernoff forms
# ---------------------------------------------------------------------------

def chernoff_bounds(A: float, B: float, delta: float):
    """The two Chernoff forms for a sum of independent Bernoullis with
    A <= E[X] <= B: (P[X >= (1+delta)B] <= e^{-delta^2 B / 3},
    P[X <= (1-delta)A] <= e^{-delta^2 A / 2})."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1); got {delta}")
    if not 0.0 <= A <= B:
        raise ValueError(f"need 0 <= A <= B; got A={A}, B={B}")
    upper = math.exp(-delta * delta * B / 3.0)
    lower = math.exp(-delta * delta * A / 2.0)
    return upper, lower


# ---------------------------------------------------------------------------
# grid sweeps (vectorized)
# ---------------------------------------------------------------------------

@dataclass
class SweepSummary:
    name: str
    checked: int
    failures: int
    worst_slack: float

    @property
    def holds_everywhere(self) -> bool:
        return self.failures == 0


def _pmf_log_matrix(M: int, m: int, lg: np.ndarray):
    """log pmf over K = 0..M (rows) and l = 0..m (cols); -inf off-support."""
    K = np.arange(M + 1, dtype=np.int64)[:, None]
    l = np.arange(m + 1, dtype=np.int64)[None, :]
    ok = (l <= K) & (m - l <= M - K)
    Kl = np.where(ok, K - l, 0)
    MKml = np.where(ok, (M - K) - (m - l), 0)
    lp = (lg[K] - lg[l] - lg[Kl]
          + lg[M - K] - lg[m - l] - lg[MKml]
          - (lg[M] - lg[m] - lg[M - m]))
    return np.where(ok, lp, -np.inf), ok


def _sweep_core(M_grid: Sequence[int], family: str, collect_rows=False):
    """Shared driver for the pointmass / cor-C2 / first-tail sweeps."""
    checked = 0
    failures = 0
    worst = math.inf
    rows = []
    for M in M_grid:
        lg = gammaln(np.arange(M + 2, dtype=np.float64) + 1.0)  # lg[i] = ln(i!)
        for m in range(1, M // 4 + 1):
            logpmf, ok = _pmf_log_matrix(M, m, lg)
            K = np.arange(M + 1, dtype=np.float64)[:, None]
            l = np.arange(m + 1, dtype=np.float64)[None, :]
            a = l / m
            b = K / M
            x = m / M
            interior = (l > 0) & (l < m) & (l < K) & (m - l < M - K) & ok
            if family == "pointmass":
                with np.errstate(divide="ignore", invalid="ignore"):
                    kl = a * np.log(a / b) + (1 - a) * np.log((1 - a) / (1 - b))
                    F = (kl + (x / (1 - x)) * (a - b) ** 2
                         / (2 * (b - a * x) * ((1 - b) - (1 - a) * x))) * m
                    logbound = (0.5 * math.log(math.pi / 32.0)
                                + 0.5 * (math.log1p(-x)
                                         - np.log(m * a * (1 - a)))
                                - F)
                applicable = interior & (b > 0) & (b < 1)
                exact = logpmf
            elif family == "cor_c2":
                with np.errstate(divide="ignore", invalid="ignore"):
                    logbound = (0.5 * np.log(math.pi / (64 * m * a * (1 - a)))
                                - 3 * (a - b) ** 2 * m / (b * (1 - b)))
                applicable = (interior & (a <= 2 * b) & (1 - a <= 2 * (1 - b))
                              & (x <= 0.25) & (b > 0) & (b < 1))
                exact = logpmf
            elif family == "first_tail":
                pmf = np.exp(logpmf)
                tail = np.cumsum(pmf[:, ::-1], axis=1)[:, ::-1]
                with np.errstate(divide="ignore", invalid="ignore"):
                    logbound = _LOG_ETA - 6 * (a - b) ** 2 * m / (b * (1 - b))
                    exact = np.where(tail > 0, np.log(tail), -np.inf)
                applicable = ((a <= 1.6 * b) & (1 - a <= 2 * (1 - b))
                              & (x <= 0.25) & (m * a * (1 - a) >= 4)
                              & (l < K) & (m - l < M - K)
                              & (b > 0) & (b < 1))
            else:
                raise ValueError(family)
            holds = exact >= logbound
            checked += int(applicable.sum())
            bad = applicable & ~holds
            failures += int(bad.sum())
            if applicable.any():
                with np.errstate(invalid="ignore"):
                    diff = exact - logbound
                worst = min(worst, float(diff[applicable].min()))
            if collect_rows:
                idx = np.argwhere(applicable)
                for Ki, li in idx:
                    rows.append((M, int(Ki), m, int(li),
                                 li / m, Ki / M, m / M,
                                 float(exact[Ki, li]),
                                 float(logbound[Ki, li]),
                                 bool(exact[Ki, li] >= logbound[Ki, li]),
                                 float(exact[Ki, li] - logbound[Ki, li])))
    summary = SweepSummary(family, checked, failures,
                           worst if checked else float("nan"))
    return (summary, rows) if collect_rows else summary


def sweep_pointmass(M_grid: Sequence[int]) -> SweepSummary:
    """Exhaustive check of the point-mass lower bound (log-space slack)."""
    return _sweep_core(M_grid, "pointmass")


def sweep_cor_c2(M_grid: Sequence[int]) -> SweepSummary:
    return _sweep_core(M_grid, "cor_c2")


def sweep_first_tail(M_grid: Sequence[int]) -> SweepSummary:
    return _sweep_core(M_grid, "first_tail")


def sweep_sampling(n_grid: Sequence[int]) -> SweepSummary:
    """Exhaustive check of the sampling corollary over admissible
    (n, k, eps, m_draw) with integral class boundaries."""
    checked = 0
    failures = 0
    worst = math.inf
    for n in n_grid:
        for k in range(max(1, n // 20), n // 2 + 1, max(1, n // 40)):
            beta = k / n
            for ne in range(1, int(beta * n / 4) + 1, max(1, k // 16)):
                eps = ne / n
                m_lo = math.ceil(8.0 / beta)
                for m_draw in range(m_lo, n // 4 + 1, max(1, n // 32)):
                    rep = sampling_lemma_check(n, k, eps, m_draw)
                    if not rep.applicable:
                        continue
                    checked += 1
                    if not rep.holds:
                        failures += 1
                    worst = min(worst, rep.slack)
    return SweepSummary("sampling", checked, failures,
                        worst if checked else float("nan"))


def sweep_rows_csv(M_grid: Sequence[int], family: str) -> str:
    """Full per-instance CSV for one bound family (exact/bound in log space
    for the point-mass families, linear slack sign preserved)."""
    _, rows = _sweep_core(M_grid, family, collect_rows=True)
    lines = ["M,K,m,l,a,b,x,exact,bound,holds,slack"]
    for r in rows:
        lines.append(",".join(
            [str(r[0]), str(r[1]), str(r[2]), str(r[3]),
             f"{r[4]:.10g}", f"{r[5]:.10g}", f"{r[6]:.10g}",
             f"{r[7]:.12g}", f"{r[8]:.12g}",
             "true" if r[9] else "false", f"{r[10]:.12g}"]))
    return "\n".join(lines) + "\n"
