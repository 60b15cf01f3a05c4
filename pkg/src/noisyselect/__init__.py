"""Fault-tolerant approximate k-selection under noisy comparisons.

Selects an element with rank in (k - n*eps, k + n*eps] of a hidden total
order using pairwise comparisons that are each independently wrong with
probability p < 1/2, in expected O((k/n) eps^-2 log(1/Q)) comparisons with
failure probability at most Q.  Ships the algorithm stack (majority votes,
purifying processes, trial-and-error top level), a simulated noisy oracle
with exact call accounting, exact-probability bound oracles, and a Monte
Carlo verification harness.
"""

from .approx_kselect import (SelectSchedule, approx_kselect,
                             approx_min_fallback, normalize_problem,
                             purify_select_round, select_schedule)
from .approx_median import (MedianSchedule, approx_median, median_schedule,
                            purify_median_round, sm_baseline)
from .bounds import (BoundReport, HyperSpec, chernoff_bounds, hyper_pmf,
                     hyper_tail, kl_div, pointmass_lower_bound,
                     sampling_lemma_check, tail_lower_bound)
from .harness import (CampaignConfig, CampaignResult, CampaignSummary,
                      TrialRecord, emit_report, fit_scaling, parse_report,
                      run_campaign, wilson_upper_95)
from .oracle import GroundTruth, NoisyOracle, new_universe
from .primitives import (VoteParams, c_of, majority_compare, median_of_three,
                         min_of_two, neither_min_nor_max, q_of, sel_exact,
                         vote_failure_exact)
from .toplevel import (TopLevelConfig, sample_stage, select_approx,
                       verify_candidate)

__version__ = "0.1.0"
