"""Command-line front end.

Subcommands::

    leakfuzz run          one campaign; writes report.json and progress.jsonl
    leakfuzz bench        R campaigns per target; writes bench.csv, summary.json, bench.txt
    leakfuzz verify       exhaustive ground-truth sweep of one target
    leakfuzz list-targets registered targets and their ground-truth formulas
    leakfuzz schema       JSON Schema of a machine-readable output

Exit codes: 0 success, 1 ground-truth mismatch (verify), 2 usage error
(unknown target, bad flag, sweep over budget), 3 campaign abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import statistics
import sys
from pathlib import Path
from typing import Optional, Sequence

from .engine import CampaignConfig, CampaignReport, run_campaign
from .errors import BudgetExceededError, CampaignAbortError, LeakFuzzError
from .partition import PARTITION_ALGORITHMS
from .schemas import SCHEMAS
from .targets import TARGETS, UnknownTargetError, get_target, list_targets, target_parameters, verify_ground_truth

__all__ = ["main", "build_parser", "summarize_runs", "BENCH_COLUMNS", "EXIT_OK", "EXIT_MISMATCH", "EXIT_USAGE", "EXIT_ABORT"]

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_ABORT = 3

BENCH_COLUMNS = [
    "target", "epsilon", "K", "reps", "p_mean", "p_ci95", "p_max", "delta_at_pmax",
    "t_kgt1_mean_s", "t_pmax_mean_s", "t_pmax_min_s",
]

CI_LABEL = "95% CI (normal approx.)"
CI_FORMULA = "mean +/- 1.96 * sample_stddev / sqrt(R)"

# size flags and the factory parameters they may set
_SIZE_FLAGS = {
    "len_chars": ("length",),
    "len_bits": ("n_bits", "length_bits"),
    "modulus": ("modulus",),
}

log = logging.getLogger("leakfuzz")


class UsageError(Exception):
    pass


def _target_params(name: str, args, strict: bool = True) -> dict:
    if name not in TARGETS:
        raise UnknownTargetError(f"unknown target {name!r}; known: {', '.join(sorted(TARGETS))}")
    accepted = target_parameters(name)
    params = {}
    for flag, candidates in _SIZE_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        match = next((p for p in candidates if p in accepted), None)
        if match is None:
            if strict:
                option = "--" + flag.replace("_", "-")
                raise UsageError(f"{option} does not apply to target {name!r}")
            continue
        params[match] = value
    return params


def _config(args, target: str, seed: int, strict: bool = True) -> CampaignConfig:
    return CampaignConfig(
        target=target,
        target_params=_target_params(target, args, strict=strict),
        K=args.K,
        epsilon=args.epsilon,
        timeout=args.timeout,
        partition=args.partition,
        rng_seed=seed,
        max_evals=args.max_evals,
        stop_at_k=args.stop_at_k,
        stats_interval=args.stats_interval,
    )


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def cmd_run(args) -> int:
    config = _config(args, args.target, args.seed)
    out = Path(args.out or f"runs/{args.target}-seed{args.seed}")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "progress.jsonl", "w") as progress_file:

        def progress(record):
            progress_file.write(json.dumps(record) + "\n")
            progress_file.flush()
            log.info("progress %s", record)

        report = run_campaign(config, progress=progress)
    _write_json(out / "report.json", report.to_dict())
    if args.json:
        print(report.to_json(indent=2))
    else:
        print(f"k={report.k_best}, min-entropy={report.min_entropy_bits:.3f} bits, delta={report.delta_best}")
        print(f"report: {out / 'report.json'}")
    return EXIT_OK


def _mean(values):
    return statistics.fmean(values) if values else None


def summarize_runs(reports: Sequence[CampaignReport]) -> dict:
    """RepetitionSummary statistics over completed runs.

    ``p`` is the best class count of each run. Time to ``p_max`` is
    averaged over the runs that reached ``p_max``; time to ``k > 1`` over
    the runs that left the single-class state.
    """
    if not reports:
        return {c: None for c in BENCH_COLUMNS[4:]}
    ks = [r.k_best for r in reports]
    r_count = len(ks)
    sd = statistics.stdev(ks) if r_count > 1 else 0.0
    p_max = max(ks)
    at_max = [r for r in reports if r.k_best == p_max]
    kgt1 = [r.time_to_k_gt1_s for r in reports if r.time_to_k_gt1_s is not None]
    return {
        "p_mean": statistics.fmean(ks),
        "p_ci95": 1.96 * sd / math.sqrt(r_count),
        "p_max": p_max,
        "delta_at_pmax": max(r.delta_best for r in at_max),
        "t_kgt1_mean_s": _mean(kgt1),
        "t_pmax_mean_s": _mean([r.time_to_best_s for r in at_max]),
        "t_pmax_min_s": min(r.time_to_best_s for r in at_max),
    }


def _fmt(value, spec=".2f"):
    return "-" if value is None else format(value, spec)


def _table(rows) -> str:
    header = f"{'target':<26}{'eps':>4}{'K':>5}{'R':>4}  {'p_mean (+/- CI)':<18}{'p_max':>6}{'d_max':>8}" \
        f"{'t(k>1)':>9}{'t(p_max)':>10}{'t_min':>9}"
    lines = [header, "-" * len(header)]
    for row in rows:
        p = "-" if row["p_mean"] is None else f"{row['p_mean']:.2f} (+/- {row['p_ci95']:.2f})"
        lines.append(
            f"{row['target']:<26}{row['epsilon']:>4}{row['K']:>5}{row['reps']:>4}  {p:<18}"
            f"{_fmt(row['p_max'], 'd'):>6}{_fmt(row['delta_at_pmax'], 'd'):>8}"
            f"{_fmt(row['t_kgt1_mean_s']):>9}{_fmt(row['t_pmax_mean_s']):>10}{_fmt(row['t_pmax_min_s']):>9}"
        )
        if row["excluded"]:
            lines.append(f"  ({row['excluded']} of {row['requested_reps']} runs failed and were excluded)")
    lines.append(f"CI: {CI_LABEL}, {CI_FORMULA}")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    # size flags apply to the targets that take them; unknown names fail before any run
    targets = args.target or list(TARGETS)
    for name in targets:
        _target_params(name, args, strict=False)
    out = Path(args.out or "bench")
    (out / "runs").mkdir(parents=True, exist_ok=True)
    rows = []
    for name in targets:
        reports, failures, seeds = [], [], []
        for rep in range(args.reps):
            seed = args.seed + rep
            config = _config(args, name, seed, strict=False)
            try:
                report = run_campaign(config)
            except LeakFuzzError as exc:
                log.warning("%s seed %d failed: %s", name, seed, exc)
                failures.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
                continue
            _write_json(out / "runs" / f"{name}-seed{seed}.json", report.to_dict())
            reports.append(report)
            seeds.append(seed)
            log.info("%s seed %d: k=%d delta=%d", name, seed, report.k_best, report.delta_best)
        row = {"target": name, "epsilon": args.epsilon, "K": args.K, "reps": len(reports)}
        row.update(summarize_runs(reports))
        row.update({"requested_reps": args.reps, "excluded": len(failures), "failures": failures, "seeds": seeds})
        rows.append(row)

    with open(out / "bench.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=BENCH_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if row[k] is None else row[k] for k in BENCH_COLUMNS})
    summary = {
        "confidence_interval": {
            "label": CI_LABEL,
            "formula": CI_FORMULA,
            "degrees_of_freedom": "R - 1 (sample standard deviation); half-width 0 when R = 1",
        },
        "config": {
            "K": args.K,
            "epsilon": args.epsilon,
            "timeout": args.timeout,
            "partition": args.partition,
            "first_seed": args.seed,
            "max_evals": args.max_evals,
            "stop_at_k": args.stop_at_k,
        },
        "rows": rows,
    }
    _write_json(out / "summary.json", summary)
    table = _table(rows)
    (out / "bench.txt").write_text(table + "\n")
    print(json.dumps(summary, indent=2) if args.json else table)
    return EXIT_OK


def cmd_verify(args) -> int:
    target = get_target(args.target, **_target_params(args.target, args))
    try:
        check = verify_ground_truth(target, args.epsilon, partition=args.partition, budget=args.budget)
    except BudgetExceededError as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        doc = {
            "target": check.target,
            "params": check.params,
            "epsilon": check.epsilon,
            "expected_k": check.expected_k,
            "observed_k": check.observed_k,
            "delta": check.delta,
            "bounds": check.bounds,
            "secrets_swept": check.secrets_swept,
            "passed": check.passed,
        }
        print(json.dumps(doc, indent=2))
    else:
        params = ", ".join(f"{k}={v}" for k, v in check.params.items())
        expected = "unknown" if check.expected_k is None else check.expected_k
        verdict = "PASS" if check.passed else "FAIL"
        print(
            f"{verdict} {check.target}({params}) eps={check.epsilon}: "
            f"k={check.observed_k} expected={expected} ({check.secrets_swept} secrets swept)"
        )
        for i, (lo, hi) in enumerate(check.bounds):
            print(f"  class {i}: [{lo}, {hi}]")
    return EXIT_OK if check.passed else EXIT_MISMATCH


def cmd_list_targets(args) -> int:
    rows = list_targets()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    for row in rows:
        params = ", ".join(f"{k}={v}" for k, v in row["params"].items())
        print(f"{row['name']}({params})")
        print(f"  secret {row['secret_length']} B, public {row['public_length']} B: {row['constraint']}")
        print(f"  ground truth k: {row['ground_truth']}")
        print(f"  {row['description']}")
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(SCHEMAS[args.name], indent=2))
    return EXIT_OK


def _add_size_flags(p):
    p.add_argument("--len-chars", type=int, help="string length L for the compare targets")
    p.add_argument("--len-bits", type=int, help="bit width for leak_set_bits and modpow")
    p.add_argument("--modulus", type=int, help="modulus for modpow")


def _add_campaign_flags(p):
    defaults = CampaignConfig()
    p.add_argument("--K", type=int, default=defaults.K, help="secrets per candidate (default %(default)s)")
    p.add_argument("--epsilon", type=int, default=defaults.epsilon, help="cost tolerance (default %(default)s)")
    p.add_argument("--timeout", type=float, default=defaults.timeout, help="seconds per campaign (default %(default)s)")
    p.add_argument("--partition", choices=sorted(PARTITION_ALGORITHMS), default=defaults.partition)
    p.add_argument("--seed", type=int, default=0, help="rng seed; bench uses seed .. seed+R-1")
    p.add_argument("--max-evals", type=int, help="stop after this many mutated candidates")
    p.add_argument("--stop-at-k", type=int, help="stop once this many classes are found")
    p.add_argument("--stats-interval", type=float, default=defaults.stats_interval, help="seconds between progress records")
    p.add_argument("--out", help="output directory")
    _add_size_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakfuzz", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one campaign")
    run.add_argument("--target", required=True)
    _add_campaign_flags(run)
    run.add_argument("--json", action="store_true", help="print the full report")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="repeat campaigns and summarize")
    bench.add_argument("--target", action="append", help="target to include; repeatable (default: all)")
    bench.add_argument("--reps", type=int, default=30, help="repetitions per target (default %(default)s)")
    _add_campaign_flags(bench)
    bench.add_argument("--json", action="store_true", help="print summary.json instead of the table")
    bench.set_defaults(func=cmd_bench)

    verify = sub.add_parser("verify", help="exhaustive ground-truth sweep")
    verify.add_argument("--target", required=True)
    verify.add_argument("--epsilon", type=int, default=1)
    verify.add_argument("--partition", choices=sorted(PARTITION_ALGORITHMS), default="greedy")
    verify.add_argument("--budget", type=int, default=1 << 16, help="maximum secrets to execute")
    _add_size_flags(verify)
    verify.add_argument("--json", action="store_true")
    verify.set_defaults(func=cmd_verify)

    lt = sub.add_parser("list-targets", help="list registered targets")
    lt.add_argument("--json", action="store_true")
    lt.set_defaults(func=cmd_list_targets)

    schema = sub.add_parser("schema", help="print a JSON Schema")
    schema.add_argument("name", choices=sorted(SCHEMAS))
    schema.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, UnknownTargetError, ValueError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"leakfuzz: error: {message}", file=sys.stderr)
        return EXIT_USAGE
    except CampaignAbortError as exc:
        print(f"leakfuzz: campaign aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
