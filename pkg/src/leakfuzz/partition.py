"""Partition scalar cost observations into epsilon-distinguishable classes.

Given the costs of K executions that share one public input, a class is a
contiguous run of distinct sorted costs whose span (max - min) is at most
``epsilon``. The number of classes ``k`` bounds what an attacker with
resolution ``epsilon`` can tell apart, so ``log2(k)`` is the min-entropy
leakage witnessed by those executions.

Two algorithms are provided:

* :func:`greedy_partition` scans left to right and opens a new class once a
  cost is more than ``epsilon`` above the current class minimum. It returns
  the minimum feasible ``k``.
* :func:`kdynamic_partition` builds minimum sum-of-spans partitions with a
  dynamic program and returns the first ``k`` whose optimum is feasible. It
  can overshoot the greedy count.

:func:`oracle_min_partitions` is an exhaustive reference used in tests.
"""

from __future__ import annotations

import math
import operator
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .errors import BudgetExceededError

__all__ = [
    "CostClass",
    "Partitioning",
    "greedy_partition",
    "kdynamic_partition",
    "oracle_min_partitions",
    "min_entropy",
    "objective_score",
    "check_costs",
    "check_epsilon",
    "GreedyPartitioner",
    "KDynamicPartitioner",
    "PARTITION_ALGORITHMS",
    "ORACLE_MAX_DISTINCT",
]

ORACLE_MAX_DISTINCT = 16


@dataclass(frozen=True)
class CostClass:
    """One observation class: the distinct costs that fall into it, ascending."""

    members: tuple[int, ...]

    @property
    def min(self) -> int:
        return self.members[0]

    @property
    def max(self) -> int:
        return self.members[-1]

    @property
    def span(self) -> int:
        return self.members[-1] - self.members[0]

    def __contains__(self, cost) -> bool:
        return self.members[0] <= cost <= self.members[-1]


@dataclass(frozen=True)
class Partitioning:
    """Result of partitioning a cost vector.

    ``multiplicity`` maps every distinct cost to the number of input
    observations that produced it, so witnesses for each class can be
    recovered even though classes list distinct values only.
    """

    classes: tuple[CostClass, ...]
    epsilon: int
    delta: int
    multiplicity: Mapping[int, int] = field(repr=False, compare=False)

    @property
    def k(self) -> int:
        return len(self.classes)

    def class_index(self, cost) -> int:
        """Index of the class containing ``cost``; ``-1`` if no class spans it."""
        lo, hi = 0, len(self.classes) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            cls = self.classes[mid]
            if cost < cls.min:
                hi = mid - 1
            elif cost > cls.max:
                lo = mid + 1
            else:
                return mid
        return -1

    def bounds(self) -> list[tuple[int, int]]:
        return [(c.min, c.max) for c in self.classes]


def check_epsilon(epsilon) -> int:
    try:
        eps = operator.index(epsilon)
    except TypeError:
        if isinstance(epsilon, float) and epsilon.is_integer():
            eps = int(epsilon)
        else:
            raise ValueError(f"epsilon must be a non-negative integer, got {epsilon!r}") from None
    if eps < 0:
        raise ValueError(f"epsilon must be a non-negative integer, got {epsilon!r}")
    return eps


def check_costs(costs: Iterable) -> Counter:
    """Validate a cost vector and return its multiplicity map.

    Raises ``ValueError`` on an empty vector or on any entry that is not a
    non-negative integer.
    """
    if isinstance(costs, np.ndarray):
        costs = costs.ravel().tolist()
    counts: Counter = Counter()
    for c in costs:
        try:
            v = operator.index(c)
        except TypeError:
            raise ValueError(f"costs must be integers, got {c!r}") from None
        if v < 0:
            raise ValueError(f"costs must be non-negative, got {v}")
        counts[v] += 1
    if not counts:
        raise ValueError("cost vector must contain at least one observation")
    return counts


def _gap_sum(classes) -> int:
    return sum(abs(a.max - b.min) for a, b in zip(classes, classes[1:]))


def _build(groups, epsilon, counts) -> Partitioning:
    classes = tuple(CostClass(tuple(g)) for g in groups)
    return Partitioning(classes=classes, epsilon=epsilon, delta=_gap_sum(classes), multiplicity=counts)


def greedy_partition(costs, epsilon) -> Partitioning:
    """Greedy partitioning of ``costs`` at tolerance ``epsilon``.

    >>> p = greedy_partition([1, 2, 3, 10], 1)
    >>> p.k, p.delta, p.bounds()
    (3, 8, [(1, 2), (3, 3), (10, 10)])
    """
    counts = check_costs(costs)
    eps = check_epsilon(epsilon)
    values = sorted(counts)
    groups = []
    current = [values[0]]
    for c in values[1:]:
        if c - current[0] <= eps:
            current.append(c)
        else:
            groups.append(current)
            current = [c]
    groups.append(current)
    return _build(groups, eps, counts)


def kdynamic_partition(costs, epsilon) -> Partitioning:
    """Dynamic-programming partitioning of ``costs`` at tolerance ``epsilon``.

    Row ``i`` of the table holds, for each prefix of the sorted distinct
    costs, the minimum sum of class spans over ``i`` contiguous classes.
    Rows are built lazily and shared across candidate ``k``; the first ``k``
    whose reconstructed optimum has every span within ``epsilon`` wins.
    Ties in the reconstruction go to the largest split point, i.e. the
    fewest elements in the later class.
    """
    counts = check_costs(costs)
    eps = check_epsilon(epsilon)
    values = sorted(counts)
    n = len(values)
    inf = math.inf

    # cost[i][r]: min span sum of values[:r] in i classes; split[i][r]: start of last class
    first = values[0]
    cost = [None, [inf] + [v - first for v in values]]
    split = [None, [0] * (n + 1)]

    def reconstruct(k):
        bounds = []
        r = n
        for i in range(k, 1, -1):
            j = split[i][r]
            bounds.append((j, r))
            r = j
        bounds.append((0, r))
        bounds.reverse()
        return [values[a:b] for a, b in bounds]

    for k in range(1, n + 1):
        if k > 1:
            prev = cost[k - 1]
            row = [inf] * (n + 1)
            arg = [0] * (n + 1)
            best, best_j = inf, 0
            for r in range(k, n + 1):
                # admit split point j = r - 1: last class starts at values[r - 1]
                j = r - 1
                cand = prev[j] - values[j]
                if cand <= best:
                    best, best_j = cand, j
                row[r] = best + values[r - 1]
                arg[r] = best_j
            cost.append(row)
            split.append(arg)
        groups = reconstruct(k)
        if all(g[-1] - g[0] <= eps for g in groups):
            return _build(groups, eps, counts)
    raise AssertionError("singleton partition is always feasible")  # pragma: no cover


def oracle_min_partitions(costs, epsilon) -> int:
    """Exhaustive minimum class count over all contiguous groupings.

    Every one of the ``2**(n-1)`` ways to cut the ``n`` sorted distinct
    values is checked. Restricting to contiguous groups loses nothing: in an
    optimal span-bounded grouping of a totally ordered set, exchanging
    out-of-order elements never widens a group.
    """
    counts = check_costs(costs)
    eps = check_epsilon(epsilon)
    values = sorted(counts)
    n = len(values)
    if n > ORACLE_MAX_DISTINCT:
        raise BudgetExceededError(
            f"oracle enumerates at most {ORACLE_MAX_DISTINCT} distinct costs, got {n}"
        )
    if n == 1:
        return 1
    # bit p of a mask = cut between values[p] and values[p + 1]
    masks = np.arange(1 << (n - 1), dtype=np.int64)
    feasible = np.ones(masks.shape, dtype=bool)
    for a in range(n):
        b = next((b for b in range(a + 1, n) if values[b] - values[a] > eps), None)
        if b is None:
            continue
        required = ((1 << b) - 1) ^ ((1 << a) - 1)  # cuts a .. b-1
        feasible &= (masks & required) != 0
    return int(_cut_counts(n - 1)[feasible].min()) + 1


@lru_cache(maxsize=None)
def _cut_counts(bits: int) -> np.ndarray:
    counts = np.zeros(1 << bits, dtype=np.int64)
    for b in range(bits):
        counts[1 << b : 1 << (b + 1)] = counts[: 1 << b] + 1
    counts.flags.writeable = False
    return counts


def min_entropy(k) -> float:
    """Min-entropy leakage in bits for ``k`` distinguishable classes."""
    k = operator.index(k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return math.log2(k)


def objective_score(k, delta) -> float:
    """Scalar fitness ``k + (1 - exp(-0.1 * delta))``, used for reporting.

    The exponential term saturates to 1.0 in double precision for deltas in
    the hundreds, so ranking uses the ``(k, delta)`` pair instead.
    """
    return k - math.expm1(-0.1 * delta)


PARTITION_ALGORITHMS = {
    "greedy": greedy_partition,
    "kdynamic": kdynamic_partition,
}


class _BasePartitioner(ClusterMixin, BaseEstimator):
    _algorithm = None

    def __init__(self, epsilon=1):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        costs = _as_cost_column(X)
        part = type(self)._algorithm(costs, self.epsilon)
        self.partitioning_ = part
        self.classes_ = [list(c.members) for c in part.classes]
        self.n_classes_ = part.k
        self.delta_ = part.delta
        self.min_entropy_ = min_entropy(part.k)
        self.labels_ = np.array([part.class_index(c) for c in costs], dtype=np.intp)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Assign each cost to the fitted class whose range contains it.

        Costs not seen during ``fit`` fall in the class whose minimum is the
        largest one not above the cost, when within ``epsilon`` of it;
        anything else gets ``-1``.
        """
        check_is_fitted(self, "partitioning_")
        costs = _as_cost_column(X)
        part = self.partitioning_
        mins = [c.min for c in part.classes]
        out = np.empty(len(costs), dtype=np.intp)
        for i, c in enumerate(costs):
            idx = np.searchsorted(mins, c, side="right") - 1
            out[i] = idx if idx >= 0 and c - mins[idx] <= part.epsilon else -1
        return out


def _as_cost_column(X) -> list[int]:
    arr = np.asarray(X)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single cost column, got shape {arr.shape}")
        arr = arr[:, 0]
    elif arr.ndim != 1:
        raise ValueError(f"expected 1-D costs, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("cost vector must contain at least one observation")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
            raise ValueError("costs must be integers")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind not in "iuO":
        raise ValueError(f"costs must be integers, got dtype {arr.dtype}")
    costs = arr.tolist()
    check_costs(costs)
    return costs


class GreedyPartitioner(_BasePartitioner):
    """Estimator wrapper around :func:`greedy_partition`.

    Parameters
    ----------
    epsilon : int, default=1
        Attacker resolution; costs within ``epsilon`` of a class minimum
        are indistinguishable from it.

    Attributes
    ----------
    partitioning_ : Partitioning
    classes_ : list of list of int
        Distinct costs of each class, ascending.
    n_classes_ : int
    delta_ : int
        Sum of gaps between consecutive classes.
    min_entropy_ : float
    labels_ : ndarray of shape (n_samples,)
        Class index of every fitted observation.
    """

    _algorithm = staticmethod(greedy_partition)


class KDynamicPartitioner(_BasePartitioner):
    """Estimator wrapper around :func:`kdynamic_partition`.

    Same parameters and fitted attributes as :class:`GreedyPartitioner`.
    """

    _algorithm = staticmethod(kdynamic_partition)
