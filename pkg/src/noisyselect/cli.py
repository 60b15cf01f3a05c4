"""Command-line harness.

Subcommands: ``select`` (one end-to-end run), ``bench`` (Monte Carlo
campaign), ``verify bounds`` (hypergeometric bound sweeps), and
``verify primitives`` (majority-vote and median-of-three checks).

A ``--config`` file holds line-oriented ``key=value`` pairs using the long
option names; explicit flags override the file.  Exit codes: 0 success,
1 acceptance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path


def _parse_config_file(path: str) -> dict:
    values = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"config {path}:{line_no}: expected key=value, "
                             f"got {raw!r}") from None
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_COERCE = {
    "n": int, "k": int, "trials": int, "seed": int, "workers": int,
    "grid_max_m": int,
    "eps": float, "p": float, "q": float, "scale_factor": float,
    "assert_wilson": float,
    "constants": str, "format": str, "out": str,
}


def _merged(args: argparse.Namespace, file_values: dict, defaults: dict):
    """defaults < config file < explicit flags (None marks 'not given')."""
    out = dict(defaults)
    for key, raw in file_values.items():
        if key not in _COERCE:
            raise SystemExit(f"config file: unknown key {key!r}")
        try:
            out[key] = _COERCE[key](raw)
        except ValueError:
            raise SystemExit(f"config file: bad value for {key}: {raw!r}") \
                from None
    for key, value in vars(args).items():
        if value is not None and key in _COERCE:
            out[key] = value
    return out


def _problem_args(sub):
    sub.add_argument("--n", type=int)
    sub.add_argument("--k", type=int)
    sub.add_argument("--eps", type=float)
    sub.add_argument("--p", type=float)
    sub.add_argument("--q", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--constants", choices=("paper", "scaled"))
    sub.add_argument("--scale-factor", type=float, dest="scale_factor")
    sub.add_argument("--config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisyselect",
        description="Fault-tolerant approximate k-selection harness")
    commands = parser.add_subparsers(dest="command", required=True)

    select = commands.add_parser("select", help="one end-to-end run")
    _problem_args(select)

    bench = commands.add_parser("bench", help="Monte Carlo campaign")
    _problem_args(bench)
    bench.add_argument("--trials", type=int)
    bench.add_argument("--workers", type=int)
    bench.add_argument("--out")
    bench.add_argument("--format", choices=("csv", "json"))
    bench.add_argument("--assert-wilson", type=float, dest="assert_wilson",
                       help="exit 1 if the Wilson upper bound exceeds this")

    verify = commands.add_parser("verify", help="verification sweeps")
    verify_sub = verify.add_subparsers(dest="verify_what", required=True)
    vb = verify_sub.add_parser("bounds", help="hypergeometric bound grids")
    vb.add_argument("--grid-max-M", type=int, dest="grid_max_m")
    vb.add_argument("--out")
    vb.add_argument("--config")
    vp = verify_sub.add_parser("primitives",
                               help="majority vote / median-of-three checks")
    vp.add_argument("--p", type=float)
    vp.add_argument("--trials", type=int)
    vp.add_argument("--config")
    return parser


_DEFAULTS = dict(n=100_000, k=None, eps=0.15, p=0.25, q=0.1, seed=1,
                 trials=100, workers=1, constants="paper", scale_factor=1.0,
                 out=None, format="csv", assert_wilson=None, grid_max_m=500)


def _campaign_config(values: dict, algorithm="select_approx"):
    from .harness import CampaignConfig
    n = values["n"]
    k = values["k"] if values["k"] is not None else n // 2
    return CampaignConfig(
        n=n, k=k, eps=values["eps"], p=values["p"], q=values["q"],
        trials=values["trials"], seed=values["seed"],
        constants=values["constants"], scale_factor=values["scale_factor"],
        workers=values["workers"], algorithm=algorithm)


def _cmd_select(values: dict) -> int:
    from .harness import CampaignConfig, run_campaign
    config = _campaign_config({**values, "trials": 1})
    result = run_campaign(config)
    record = result.records[0]
    print(f"returned_rank={record.returned_rank} "
          f"oracle_calls={record.oracle_calls} rounds={record.rounds} "
          f"relevant={'yes' if record.success else 'no'}")
    return 0


def _cmd_bench(values: dict) -> int:
    from .harness import emit_report, run_campaign
    result = run_campaign(_campaign_config(values))
    s = result.summary
    data = emit_report(result, values["format"])
    if values["out"]:
        Path(values["out"]).write_bytes(data)
    else:
        sys.stdout.write(data.decode())
    print(f"trials={s.trials} failures={s.failures} "
          f"failure_rate={s.failure_rate:.6f} "
          f"wilson_upper_95={s.wilson_upper_95:.6f} "
          f"mean_calls={s.mean_calls:.1f}", file=sys.stderr)
    if values["assert_wilson"] is not None \
            and s.wilson_upper_95 > values["assert_wilson"]:
        print(f"ACCEPTANCE FAIL: wilson_upper_95 {s.wilson_upper_95:.6f} > "
              f"{values['assert_wilson']}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify_bounds(values: dict) -> int:
    from . import bounds
    gmax = values["grid_max_m"]
    grid = [M for M in (200, 500, 1000, 2000) if M <= gmax] or [gmax]
    n_grid = [M for M in (400, 800, 1600) if M <= gmax] or [gmax]
    failures = 0
    out_dir = Path(values["out"]) if values["out"] else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for name, sweep in (("pointmass", bounds.sweep_pointmass),
                        ("cor_c2", bounds.sweep_cor_c2),
                        ("first_tail", bounds.sweep_first_tail)):
        summary = sweep(grid)
        print(f"{name}: checked={summary.checked} "
              f"failures={summary.failures} "
              f"worst_slack={summary.worst_slack:.6g} "
              f"{'PASS' if summary.holds_everywhere else 'FAIL'}")
        failures += summary.failures
        if out_dir:
            (out_dir / f"{name}.csv").write_text(
                bounds.sweep_rows_csv([min(grid, key=lambda M: abs(M - 200))],
                                      name))
    summary = bounds.sweep_sampling(n_grid)
    print(f"sampling: checked={summary.checked} failures={summary.failures} "
          f"worst_slack={summary.worst_slack:.6g} "
          f"{'PASS' if summary.holds_everywhere else 'FAIL'}")
    failures += summary.failures
    return 1 if failures else 0


def _cmd_verify_primitives(values: dict) -> int:
    import numpy as np

    from .oracle import NoisyOracle, new_universe
    from .primitives import (c_of, majority_compare,
                             median_of_three_distribution,
                             vote_failure_exact, vote_failure_exact_fraction)

    p = values["p"]
    trials = values["trials"]
    ok = True

    for t in range(1, 7):
        g = vote_failure_exact(p, t)
        g_exact = float(vote_failure_exact_fraction(p, t))
        rel = abs(g - g_exact) / g_exact if g_exact else 0.0
        line_ok = g <= math.exp(-t) and rel < 1e-10
        ok &= line_ok
        print(f"lemma1 t={t}: failure={g:.6g} <= e^-{t}={math.exp(-t):.6g} "
              f"rational_rel_err={rel:.2e} {'PASS' if line_ok else 'FAIL'}")

    g4 = vote_failure_exact_fraction(p, 4)
    p_min, p_med, p_max = median_of_three_distribution(g4)
    sym_ok = (p_min == p_max == Fraction(4, 3) * g4 * (1 - g4)
              and p_med >= Fraction(12, 13))
    ok &= sym_ok
    print(f"lemma2: P[min]=P[max]={float(p_min):.6g} "
          f"P[median]={float(p_med):.6g} {'PASS' if sym_ok else 'FAIL'}")

    truth = new_universe(1000, 500, 0.1, values["seed"])
    oracle = NoisyOracle.create(truth, p, values["seed"] + 1)
    x, y = int(truth.ids_of_ranks(np.array([100]))[0]), \
        int(truth.ids_of_ranks(np.array([900]))[0])
    wrong = sum(1 for _ in range(trials)
                if not majority_compare(oracle, x, y, 2))
    bound = math.exp(-2) + 3 * math.sqrt(math.exp(-2) / trials) + 1e-9
    mc_ok = wrong / trials <= bound
    ok &= mc_ok
    print(f"majority_compare t=2: empirical_error={wrong / trials:.6g} "
          f"<= {bound:.6g} {'PASS' if mc_ok else 'FAIL'} "
          f"(calls={oracle.calls_used()}, c_p={c_of(p)})")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    file_values = (_parse_config_file(args.config)
                   if getattr(args, "config", None) else {})
    values = _merged(args, file_values, _DEFAULTS)
    values["seed"] = values.get("seed") or 1
    try:
        if args.command == "select":
            return _cmd_select(values)
        if args.command == "bench":
            return _cmd_bench(values)
        if args.command == "verify" and args.verify_what == "bounds":
            return _cmd_verify_bounds(values)
        if args.command == "verify" and args.verify_what == "primitives":
            return _cmd_verify_primitives(values)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
