import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from leakfuzz.errors import BudgetExceededError
from leakfuzz.partition import (
    GreedyPartitioner,
    KDynamicPartitioner,
    greedy_partition,
    kdynamic_partition,
    min_entropy,
    objective_score,
    oracle_min_partitions,
)

ALGORITHMS = [greedy_partition, kdynamic_partition]

cost_vectors = st.lists(st.integers(0, 30), min_size=1, max_size=40)
epsilons = st.integers(0, 5)


def min_groups_any_partition(values, eps):
    """Minimum block count over *all* set partitions (not just contiguous)."""
    values = list(values)
    best = len(values)

    def rec(i, blocks):
        nonlocal best
        if len(blocks) >= best:
            return
        if i == len(values):
            best = len(blocks)
            return
        v = values[i]
        for b in blocks:
            if max(max(b), v) - min(min(b), v) <= eps:
                b.append(v)
                rec(i + 1, blocks)
                b.pop()
        blocks.append([v])
        rec(i + 1, blocks)
        blocks.pop()

    rec(0, [])
    return best


# -- examples -----------------------------------------------------------------


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_all_equal_costs_form_one_class(algorithm):
    p = algorithm([7, 7, 7, 7], 0)
    assert (p.k, p.delta) == (1, 0)
    assert [c.members for c in p.classes] == [(7,)]
    assert p.multiplicity[7] == 4


def test_greedy_hand_trace():
    p = greedy_partition([1, 2, 3, 10], 1)
    assert p.k == 3
    assert p.delta == 8
    assert [list(c.members) for c in p.classes] == [[1, 2], [3], [10]]


def test_greedy_two_far_values():
    p = greedy_partition([0, 5], 4)
    assert (p.k, p.delta) == (2, 5)


def test_greedy_seventeen_prefix_classes():
    costs = [100 + 3 * i for i in range(17)]
    assert greedy_partition(costs, 1).k == 17
    # the same progression at eps=4 pairs neighbours up
    assert greedy_partition(costs, 4).k == 9


def test_kdynamic_examples():
    assert kdynamic_partition([7, 7, 7, 7], 0).k == 1
    assert kdynamic_partition([7, 7, 7, 7], 0).delta == 0
    assert kdynamic_partition([1, 2, 3, 10], 1).k == 3


def test_kdynamic_brute_force_confirms_first_feasible_k():
    values = [1, 2, 3, 10]
    for k in range(1, len(values) + 1):
        best = None
        for cuts in itertools.combinations(range(1, len(values)), k - 1):
            bounds = (0, *cuts, len(values))
            groups = [values[a:b] for a, b in zip(bounds, bounds[1:])]
            total = sum(g[-1] - g[0] for g in groups)
            if best is None or total < best[0]:
                best = (total, groups)
        if all(g[-1] - g[0] <= 1 for g in best[1]):
            break
    assert k == 3 == kdynamic_partition(values, 1).k


def test_kdynamic_ties_break_toward_short_last_class():
    # gaps are all 1, so every 2-split has the same span sum
    p = kdynamic_partition([0, 1, 2, 3], 2)
    assert p.bounds() == [(0, 2), (3, 3)]


def test_oracle_examples():
    assert oracle_min_partitions([1, 2, 3, 10], 1) == 3
    assert oracle_min_partitions([4], 0) == 1
    assert oracle_min_partitions([4], 9) == 1
    assert oracle_min_partitions([0, 1, 2], 2) == 1


def test_oracle_budget():
    oracle_min_partitions(list(range(16)), 0)
    with pytest.raises(BudgetExceededError):
        oracle_min_partitions(list(range(17)), 0)


def test_min_entropy_values():
    assert min_entropy(1) == 0.0
    assert min_entropy(2) == 1.0
    assert min_entropy(64) == 6.0
    with pytest.raises(ValueError):
        min_entropy(0)


def test_objective_score():
    assert objective_score(1, 0) == 1.0
    assert objective_score(3, 8) == pytest.approx(3 + (1 - math.exp(-0.8)))
    assert objective_score(3, 8) == pytest.approx(3.5507, abs=1e-4)


# beyond delta ~ 300 the exponential term rounds to 1.0 in double precision
@given(st.integers(1, 50), st.integers(0, 100), st.integers(1, 100))
def test_objective_increases_in_delta_below_next_k(k, delta, step):
    assert objective_score(k, delta) < objective_score(k, delta + step) < k + 1


@pytest.mark.parametrize("algorithm", ALGORITHMS)
@pytest.mark.parametrize("bad", [[], [1, -2], [1.5], ["3"]])
def test_invalid_costs_rejected(algorithm, bad):
    with pytest.raises(ValueError):
        algorithm(bad, 1)


@pytest.mark.parametrize("eps", [-1, 0.5, "1"])
def test_invalid_epsilon_rejected(eps):
    with pytest.raises(ValueError):
        greedy_partition([1, 2], eps)


def test_large_costs_stay_exact():
    big = 2**64 - 1
    p = kdynamic_partition([0, big, big - 1], 1)
    assert p.k == 2
    assert p.delta == big - 1


# -- properties ---------------------------------------------------------------


@settings(max_examples=300)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=30).filter(lambda c: len(set(c)) <= 12), epsilons)
def test_greedy_matches_oracle(costs, eps):
    assert greedy_partition(costs, eps).k == oracle_min_partitions(costs, eps)


@settings(max_examples=300)
@given(cost_vectors, epsilons)
def test_kdynamic_never_below_greedy(costs, eps):
    g = greedy_partition(costs, eps)
    d = kdynamic_partition(costs, eps)
    assert d.k >= g.k
    if eps == 0:
        assert d.k == g.k


@given(cost_vectors)
def test_zero_tolerance_gives_distinct_singletons(costs):
    for algorithm in ALGORITHMS:
        p = algorithm(costs, 0)
        assert p.k == len(set(costs))
        assert [c.members for c in p.classes] == [(v,) for v in sorted(set(costs))]


@settings(max_examples=300)
@given(cost_vectors, epsilons)
def test_classes_valid_and_delta_consistent(costs, eps):
    for algorithm in ALGORITHMS:
        p = algorithm(costs, eps)
        members = [m for c in p.classes for m in c.members]
        assert members == sorted(set(costs))
        for c in p.classes:
            assert c.max - c.min <= eps
            assert list(c.members) == sorted(c.members)
        for a, b in zip(p.classes, p.classes[1:]):
            assert a.max < b.min
        assert p.delta == sum(abs(a.max - b.min) for a, b in zip(p.classes, p.classes[1:]))
        assert (p.delta == 0) == (p.k == 1)
        assert sum(p.multiplicity.values()) == len(costs)


@given(cost_vectors, epsilons)
def test_greedy_break_rule(costs, eps):
    p = greedy_partition(costs, eps)
    for a, b in zip(p.classes, p.classes[1:]):
        assert b.min - a.min > eps


@given(cost_vectors, epsilons, st.randoms(use_true_random=False))
def test_permutation_and_duplication_invariance(costs, eps, rnd):
    shuffled = list(costs) + rnd.sample(costs, len(costs) // 2)
    rnd.shuffle(shuffled)
    for algorithm in ALGORITHMS:
        a, b = algorithm(costs, eps), algorithm(shuffled, eps)
        assert (a.k, a.delta, a.bounds()) == (b.k, b.delta, b.bounds())


@given(cost_vectors, st.integers(0, 10), st.integers(0, 10))
def test_greedy_monotone_in_epsilon(costs, e1, e2):
    lo, hi = sorted((e1, e2))
    assert greedy_partition(costs, hi).k <= greedy_partition(costs, lo).k


@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_min_entropy_monotone(k1, k2):
    if k1 < k2:
        assert min_entropy(k1) < min_entropy(k2)


def test_contiguity_lemma_against_set_partitions():
    rng = random.Random(7)
    for _ in range(300):
        n = rng.randint(1, 8)
        values = rng.sample(range(0, 25), n)
        eps = rng.randint(0, 6)
        assert min_groups_any_partition(values, eps) == oracle_min_partitions(values, eps)


def test_oracle_exhaustive_small_vectors():
    for n in range(1, 6):
        for values in itertools.combinations(range(9), n):
            for eps in range(0, 6):
                assert greedy_partition(values, eps).k == oracle_min_partitions(values, eps)


# -- frozen over-approximation fixture ----------------------------------------

# found by randomized search over sorted samples of 0..30, eps in 1..5
KDYNAMIC_OVERSHOOT = ([11, 15, 20, 23, 26], 4)


def test_kdynamic_overshoots_by_one():
    costs, eps = KDYNAMIC_OVERSHOOT
    assert oracle_min_partitions(costs, eps) == 3
    assert greedy_partition(costs, eps).k == 3
    d = kdynamic_partition(costs, eps)
    assert d.k == 4
    # the 3-class min-span-sum cut isolates 11 and 15, leaving 20..26 too wide
    assert d.bounds() == [(11, 11), (15, 15), (20, 23), (26, 26)]


# -- estimator surface --------------------------------------------------------


@pytest.mark.parametrize("cls", [GreedyPartitioner, KDynamicPartitioner])
def test_partitioner_estimator(cls):
    est = cls(epsilon=1)
    labels = est.fit_predict(np.array([10, 1, 2, 3, 2]))
    assert est.n_classes_ == 3
    assert est.delta_ == 8
    assert est.classes_ == [[1, 2], [3], [10]]
    assert labels.tolist() == [2, 0, 0, 1, 0]
    assert est.min_entropy_ == pytest.approx(math.log2(3))
    assert est.predict([[1], [4], [11], [50]]).tolist() == [0, 1, 2, -1]
    assert est.get_params() == {"epsilon": 1}
    copy = clone(est).set_params(epsilon=0)
    assert copy.fit(np.array([[1], [2]])).n_classes_ == 2


def test_partitioner_input_validation():
    est = GreedyPartitioner()
    with pytest.raises(ValueError):
        est.fit(np.zeros((3, 2), dtype=int))
    with pytest.raises(ValueError):
        est.fit(np.array([1.5, 2.0]))
    with pytest.raises(ValueError):
        est.fit([])
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        GreedyPartitioner().predict([1])
