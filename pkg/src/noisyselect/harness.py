"""Monte Carlo campaign runner, statistics, and scaling-law fits.

A campaign is fully determined by (config, master seed): trial i draws its
own derived stream, so results are identical no matter how trials are
scheduled across workers.  The acceptance statistic is the one-sided 95%
Wilson upper bound on the failure rate, never the raw rate.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .primitives import NMM_VOTE_LEVEL, vote_cost, vote_failure_exact
from .rng import CounterRng, derive_key, mix64
from .toplevel import TopLevelConfig, nmm_experiment_batch, sample_keys

CSV_HEADER = ("trial_id,n,k,eps,p,q_target,seed,returned_rank,success,"
              "oracle_calls,rounds,exhausted,wall_ns")

ALGORITHMS = ("select_approx", "kselect", "median")


@dataclass(frozen=True)
class CampaignConfig:
    n: int
    k: int
    eps: float
    p: float
    q: float  # top-level Q; ignored by the unit algorithms
    trials: int
    seed: int
    constants: str = "paper"  # "paper" | "scaled"
    scale_factor: float = 1.0
    workers: int = 1
    algorithm: str = "select_approx"
    record_wall_ns: bool = True

    def __post_init__(self):
        if self.constants not in ("paper", "scaled"):
            raise ValueError(f"unknown constants mode {self.constants!r}")
        if self.constants == "paper" and self.scale_factor != 1.0:
            raise ValueError("paper constants require scale_factor 1.0")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")

    @property
    def scale(self) -> float:
        return self.scale_factor if self.constants == "scaled" else 1.0

    def effective_problem(self):
        """(n_eff, k_eff) after the universe's mirror and parity rules."""
        n, k = self.n, self.k
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in 1..{n}, got {k}")
        if k > n / 2:
            k = n - k
        if n % 2:
            n += 1
        return n, k


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    n: int
    k: int
    eps: float
    p: float
    q_target: float
    seed: int
    returned_rank: int
    success: bool
    oracle_calls: int
    rounds: int
    exhausted: bool
    wall_ns: int


@dataclass(frozen=True)
class CampaignSummary:
    n: int
    k: int
    eps: float
    p: float
    q_target: float
    seed: int
    constants: str
    scale_factor: float
    algorithm: str
    trials: int
    failures: int
    failure_rate: float
    wilson_upper_95: float
    mean_calls: float
    p50_calls: float
    p99_calls: float


@dataclass(frozen=True)
class CampaignResult:
    summary: CampaignSummary
    records: tuple


def wilson_upper_95(failures: int, trials: int) -> float:
    """One-sided 95% Wilson score upper bound on a binomial proportion."""
    if trials == 0:
        return 1.0
    z = 1.6448536269514722  # one-sided 95% normal quantile
    phat = failures / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    spread = (z * math.sqrt(phat * (1 - phat) / trials
                            + z * z / (4 * trials * trials)) / denom)
    return min(1.0, center + spread)


def _trial_seed(master: int, trial_id: int) -> int:
    return derive_key(mix64(master), trial_id)


def _run_select_trial(trial_key: int, plan, cfg: TopLevelConfig) -> tuple:
    """One end-to-end trial on derived streams; returns
    (returned_rank, calls, rounds, exhausted)."""
    from ._kernels import run_kselect_batch

    base = derive_key(trial_key, 0)
    keys = np.array([derive_key(base, j) for j in range(cfg.m)],
                    dtype=np.uint64)
    sample_ranks, calls = run_kselect_batch(plan, keys)
    total_calls = int(calls.sum())

    ver = CounterRng(derive_key(trial_key, 1))
    g = vote_failure_exact(plan.p, NMM_VOTE_LEVEL)
    per_experiment = 6 * vote_cost(plan.p, NMM_VOTE_LEVEL)
    m = cfg.m
    votes = cfg.verify_votes
    x_position = 0
    for round_no in range(1, cfg.round_cap + 1):
        x_position = ver.integers(m)
        positions = ver.integers(m, (votes, 3))
        other_keys, x_key = sample_keys(sample_ranks, positions, x_position)
        passed = nmm_experiment_batch(
            ver, g, np.full(votes, x_key, dtype=np.int64), other_keys)
        total_calls += votes * per_experiment
        if int(passed.sum()) > votes // 2:
            return int(sample_ranks[x_position]), total_calls, round_no, False
    return int(sample_ranks[x_position]), total_calls, cfg.round_cap, True


def run_campaign(config: CampaignConfig) -> CampaignResult:
    """Independent end-to-end runs on fresh (rank-process) universes.

    Deterministic given the master seed; trials never share stream state.
    """
    from ._kernels import build_kselect_plan, build_median_plan, run_kselect_batch

    n_eff, k_eff = config.effective_problem()
    lo = k_eff - n_eff * config.eps
    hi = k_eff + n_eff * config.eps
    records = []

    if config.algorithm in ("kselect", "median"):
        if config.algorithm == "kselect":
            plan = build_kselect_plan(n_eff, k_eff, config.eps, config.p,
                                      config.scale)
        else:
            plan = build_median_plan(n_eff, config.eps, config.p, config.scale)
        keys = np.array([_trial_seed(config.seed, t)
                         for t in range(config.trials)], dtype=np.uint64)
        ranks, calls = run_kselect_batch(plan, keys)
        for t in range(config.trials):
            rank = int(ranks[t])
            records.append(TrialRecord(
                trial_id=t, n=config.n, k=config.k, eps=config.eps,
                p=config.p, q_target=config.q, seed=config.seed,
                returned_rank=rank, success=bool(lo < rank <= hi),
                oracle_calls=int(calls[t]), rounds=0, exhausted=False,
                wall_ns=0))
    else:
        plan = build_kselect_plan(n_eff, k_eff, config.eps, config.p,
                                  config.scale)
        cfg = TopLevelConfig.from_q(config.q)

        def one(t: int):
            t0 = time.perf_counter_ns() if config.record_wall_ns else 0
            rank, calls, rounds, exhausted = _run_select_trial(
                _trial_seed(config.seed, t), plan, cfg)
            wall = (time.perf_counter_ns() - t0) if config.record_wall_ns else 0
            return TrialRecord(
                trial_id=t, n=config.n, k=config.k, eps=config.eps,
                p=config.p, q_target=config.q, seed=config.seed,
                returned_rank=rank, success=bool(lo < rank <= hi),
                oracle_calls=calls, rounds=rounds, exhausted=exhausted,
                wall_ns=wall)

        if config.workers > 1 and config.trials > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                records = list(pool.map(one, range(config.trials)))
        else:
            records = [one(t) for t in range(config.trials)]

    return CampaignResult(_summarize(config, records), tuple(records))


def _summarize(config: CampaignConfig, records) -> CampaignSummary:
    trials = len(records)
    failures = sum(1 for r in records if not r.success)
    calls = np.array([r.oracle_calls for r in records], dtype=np.float64)
    return CampaignSummary(
        n=config.n, k=config.k, eps=config.eps, p=config.p,
        q_target=config.q, seed=config.seed, constants=config.constants,
        scale_factor=config.scale_factor, algorithm=config.algorithm,
        trials=trials, failures=failures,
        failure_rate=failures / trials if trials else 0.0,
        wilson_upper_95=wilson_upper_95(failures, trials),
        mean_calls=float(calls.mean()) if trials else 0.0,
        p50_calls=float(np.percentile(calls, 50)) if trials else 0.0,
        p99_calls=float(np.percentile(calls, 99)) if trials else 0.0)


# ---------------------------------------------------------------------------
# scaling fits
# ---------------------------------------------------------------------------

_AXIS_FIELDS = {"eps": "eps", "k_over_n": "k", "logQ": "q_target"}


def fit_scaling(summaries, axis: str):
    """Least-squares scaling fit of mean comparison counts.

    For the power-law axes ("eps", "k_over_n") the slope of
    log(mean_calls) vs log(axis) is the measured exponent; for "logQ" the
    fit is mean_calls vs ln(1/Q), linear.  Returns (slope, r_squared).
    Rejects fewer than 3 points or summaries varying off-axis.
    """
    if axis not in _AXIS_FIELDS:
        raise ValueError(f"unknown axis {axis!r}")
    if len(summaries) < 3:
        raise ValueError("need at least 3 campaign summaries")
    varying = _AXIS_FIELDS[axis]
    fixed = {"n", "k", "eps", "p", "q_target", "constants", "scale_factor",
             "algorithm"} - {varying}
    for name in fixed:
        values = {getattr(s, name) for s in summaries}
        if len(values) != 1:
            raise ValueError(f"summaries vary off-axis in {name}: {values}")
    if axis == "eps":
        xs = np.log([s.eps for s in summaries])
        ys = np.log([s.mean_calls for s in summaries])
    elif axis == "k_over_n":
        xs = np.log([s.k / s.n for s in summaries])
        ys = np.log([s.mean_calls for s in summaries])
    else:
        xs = np.log([1.0 / s.q_target for s in summaries])
        ys = np.array([s.mean_calls for s in summaries])
    if len(set(xs.tolist())) < 3:
        raise ValueError("need at least 3 distinct axis values")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    return repr(float(x))


def emit_report(result: CampaignResult, format: str) -> bytes:
    """Serialize a campaign; CSV rows carry the stable per-trial fields,
    JSON round-trips the full summary + records."""
    if format == "csv":
        lines = [CSV_HEADER]
        for r in result.records:
            lines.append(",".join([
                str(r.trial_id), str(r.n), str(r.k), _fmt_float(r.eps),
                _fmt_float(r.p), _fmt_float(r.q_target), str(r.seed),
                str(r.returned_rank), "true" if r.success else "false",
                str(r.oracle_calls), str(r.rounds),
                "true" if r.exhausted else "false", str(r.wall_ns)]))
        return ("\n".join(lines) + "\n").encode()
    if format == "json":
        payload = {"summary": asdict(result.summary),
                   "records": [asdict(r) for r in result.records]}
        return (json.dumps(payload, sort_keys=True) + "\n").encode()
    raise ValueError(f"unknown format {format!r}")


def parse_report(data: bytes, format: str) -> CampaignResult:
    if format != "json":
        raise ValueError("only the json format round-trips")
    payload = json.loads(data.decode())
    summary = CampaignSummary(**payload["summary"])
    records = tuple(TrialRecord(**r) for r in payload["records"])
    return CampaignResult(summary, records)
