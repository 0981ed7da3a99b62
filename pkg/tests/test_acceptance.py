"""Acceptance criteria 1-7.

Each test prints one ``CRITERION n PASS|FAIL`` line (visible in ``pytest -v``
output) and then asserts. Criteria 4 and 5 share 15 campaigns of up to
300 s each and are marked ``slow``; deselect them with ``-m "not slow"``.
"""

import itertools
import json
import random
import time

import pytest

from leakfuzz.cli import main
from leakfuzz.engine import CampaignConfig, run_campaign
from leakfuzz.partition import greedy_partition, kdynamic_partition, min_entropy, oracle_min_partitions

from test_partition import KDYNAMIC_OVERSHOOT

SEEDS = range(5)
CAMPAIGN_SECONDS = 300


def report_line(capsys, n, passed, text):
    with capsys.disabled():
        print(f"\nCRITERION {n} {'PASS' if passed else 'FAIL'}: {text}")


# -- 1 ------------------------------------------------------------------------


def _random_vectors(rng, count):
    for _ in range(count):
        distinct = rng.sample(range(31), rng.randint(1, 12))
        vector = distinct + [rng.choice(distinct) for _ in range(rng.randint(0, len(distinct)))]
        rng.shuffle(vector)
        yield vector, rng.randint(0, 5)


def _exhaustive_vectors():
    # partitions depend only on the distinct values, so sorted multisets cover every vector
    for n in range(1, 7):
        for vector in itertools.combinations_with_replacement(range(9), n):
            for eps in range(6):
                yield list(vector), eps


def test_criterion_1_oracle_equivalence(capsys):
    start = time.perf_counter()
    failures = []
    checked = 0
    vectors = itertools.chain(_random_vectors(random.Random(20240601), 10_000), _exhaustive_vectors())
    for vector, eps in vectors:
        checked += 1
        g = greedy_partition(vector, eps).k
        d = kdynamic_partition(vector, eps).k
        ok = g == oracle_min_partitions(vector, eps) and d >= g and (eps != 0 or d == g)
        if not ok:
            failures.append((vector, eps))
    elapsed = time.perf_counter() - start
    passed = not failures and elapsed < 30
    report_line(capsys, 1, passed, f"{checked} vectors, {len(failures)} mismatches, {elapsed:.1f} s (limit 30 s)")
    assert not failures, failures[:5]
    assert elapsed < 30


# -- 2 ------------------------------------------------------------------------


def test_criterion_2_min_entropy_spot_values(capsys):
    values = {2: min_entropy(2), 64: min_entropy(64)}
    passed = abs(values[2] - 1.0) <= 1e-12 and abs(values[64] - 6.0) <= 1e-12
    report_line(capsys, 2, passed, f"k=2 -> {values[2]!r} bits, k=64 -> {values[64]!r} bits (tol 1e-12)")
    assert passed


# -- 3 ------------------------------------------------------------------------

VERIFY_CASES = [
    (["--target", "prefix_compare", "--len-chars", "2"], 3),
    (["--target", "prefix_compare", "--len-chars", "3"], 4),
    (["--target", "leak_set_bits", "--len-bits", "4"], 5),
    (["--target", "leak_set_bits", "--len-bits", "8"], 9),
    (["--target", "constant_time_compare", "--len-chars", "2"], 1),
    (["--target", "encoding_length_compare", "--len-chars", "2"], 2),
    (["--target", "modpow", "--modulus", "1717", "--len-bits", "3", "--epsilon", "0"], 7),
    (["--target", "modpow", "--modulus", "1717", "--len-bits", "4", "--epsilon", "0"], 10),
    (["--target", "modpow", "--modulus", "1717", "--len-bits", "5", "--epsilon", "0"], 13),
]


def test_criterion_3_ground_truth_sweeps(capsys):
    start = time.perf_counter()
    outcomes = []
    for argv, k in VERIFY_CASES:
        code = main(["verify", "--json", *argv])
        doc = json.loads(capsys.readouterr().out)
        outcomes.append((doc["target"], doc["params"], code == 0 and doc["observed_k"] == k))
    elapsed = time.perf_counter() - start
    passed = all(ok for *_, ok in outcomes) and elapsed < 60
    failed = [f"{t}{p}" for t, p, ok in outcomes if not ok]
    report_line(
        capsys, 3, passed,
        f"{sum(ok for *_, ok in outcomes)}/{len(outcomes)} sweeps match, {elapsed:.1f} s (limit 60 s)"
        + (f"; failed: {failed}" if failed else ""),
    )
    assert not failed
    assert elapsed < 60


# -- 4 and 5 ------------------------------------------------------------------

DESK_CAMPAIGNS = {
    # stop_at_k is each target's analytic maximum, so stopping there cannot change k_best
    "leak_set_bits": dict(target_params={"n_bits": 12}, stop_at_k=13),
    "prefix_compare": dict(target_params={"length": 16}, stop_at_k=17),
    "constant_time_compare": dict(target_params={"length": 16}),
}


@pytest.fixture(scope="module")
def desk_campaigns():
    reports = {}
    for name, extra in DESK_CAMPAIGNS.items():
        reports[name] = [
            run_campaign(
                CampaignConfig(target=name, K=100, epsilon=1, timeout=CAMPAIGN_SECONDS, rng_seed=seed, **extra)
            )
            for seed in SEEDS
        ]
    return reports


@pytest.mark.slow
def test_criterion_4_desk_scale_campaigns(capsys, desk_campaigns):
    leak = [r.k_best for r in desk_campaigns["leak_set_bits"]]
    prefix = [r.k_best for r in desk_campaigns["prefix_compare"]]
    safe = [r.k_best for r in desk_campaigns["constant_time_compare"]]
    leak_ok = all(k == 13 for k in leak)
    prefix_ok = sum(k >= 15 for k in prefix) >= 4 and sum(k == 17 for k in prefix) >= 1
    safe_ok = all(k == 1 for k in safe)
    times = {
        name: [round(r.time_to_best_s, 1) for r in runs] for name, runs in desk_campaigns.items() if name != "constant_time_compare"
    }
    report_line(
        capsys, 4, leak_ok and prefix_ok and safe_ok,
        f"leak_set_bits k={leak} t_best={times['leak_set_bits']}; "
        f"prefix_compare k={prefix} t_best={times['prefix_compare']}; constant_time_compare k={safe}",
    )
    assert leak_ok, leak
    assert prefix_ok, prefix
    assert safe_ok, safe


def replay_ordering(report):
    """Problems found by replaying a campaign's highscore history and retention log."""
    problems = []
    pairs = [(h["k"], h["delta"]) for h in report.history]
    if any(b < a for a, b in zip(pairs, pairs[1:])):
        problems.append("history not lexicographically non-decreasing")
    high = pairs[0]
    for entry in report.retention_log:
        pair = (entry["k"], entry["delta"])
        if entry["decision"] == "improves":
            if not pair > high:
                problems.append(f"iteration {entry['iteration']}: improvement {pair} not above {high}")
            high = pair
        elif not entry["coverage_after"] > entry["coverage_before"]:
            problems.append(f"iteration {entry['iteration']}: coverage_only without coverage growth")
    if high != (report.k_best, report.delta_best):
        problems.append("replayed highscore differs from the report")
    return problems


@pytest.mark.slow
def test_criterion_5_log_replay_ordering(capsys, desk_campaigns):
    reports = [r for runs in desk_campaigns.values() for r in runs]
    reports += [
        run_campaign(
            CampaignConfig(
                target=name, target_params=params, K=20, rng_seed=seed, partition="kdynamic", max_evals=3000
            )
        )
        for name, params in [("unbalanced_full_compare", {"length": 8}), ("encoding_length_compare", {"length": 4})]
        for seed in (0, 1)
    ]
    problems = {i: replay_ordering(r) for i, r in enumerate(reports)}
    bad = {i: p for i, p in problems.items() if p}
    entries = sum(len(r.retention_log) for r in reports)
    report_line(capsys, 5, not bad, f"{len(reports)} campaign logs, {entries} retained candidates replayed, {len(bad)} with violations")
    assert not bad, bad


# -- 6 ------------------------------------------------------------------------


def test_criterion_6_cmd_run_determinism(capsys, tmp_path):
    docs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code = main([
            "run", "--target", "prefix_compare", "--len-chars", "16", "--K", "100",
            "--epsilon", "1", "--seed", "11", "--max-evals", "3000", "--out", str(out),
        ])
        capsys.readouterr()
        assert code == 0
        docs.append(json.loads((out / "report.json").read_text()))
    histories = [[{k: v for k, v in h.items() if k != "elapsed_s"} for h in d["history"]] for d in docs]
    same_history = histories[0] == histories[1]
    same_witness = docs[0]["witness"] == docs[1]["witness"]
    report_line(
        capsys, 6, same_history and same_witness,
        f"two runs (seed 11, 3000 evaluations): histories {'identical' if same_history else 'differ'} "
        f"({len(histories[0])} entries), witnesses {'identical' if same_witness else 'differ'}, k={docs[0]['k_best']}",
    )
    assert same_history and same_witness


# -- 7 ------------------------------------------------------------------------


def test_criterion_7_kdynamic_overshoot_witness(capsys):
    costs, eps = KDYNAMIC_OVERSHOOT
    g = greedy_partition(costs, eps).k
    d = kdynamic_partition(costs, eps).k
    oracle = oracle_min_partitions(costs, eps)
    passed = d == g + 1 and g == oracle
    report_line(capsys, 7, passed, f"costs={costs} eps={eps}: greedy k={g}, kdynamic k={d}, oracle k={oracle}")
    assert passed
