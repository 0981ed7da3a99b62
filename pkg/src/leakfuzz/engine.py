"""Evolutionary greybox loop that maximises distinguishable cost classes.

Each candidate is a raw byte buffer. :func:`parse` slices it into one public
input and K secrets; all K secrets run under the shared public input, their
costs are partitioned, and the candidate is kept if it raises the
``(k, delta)`` highscore lexicographically or reaches new coverage.
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache, partial
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import CampaignAbortError, TargetFaultError
from .execution import TargetSpec, batch_execute, execute
from .partition import (
    PARTITION_ALGORITHMS,
    Partitioning,
    check_epsilon,
    min_entropy,
    objective_score,
)
from .targets import get_target

__all__ = [
    "CampaignConfig",
    "InputLayout",
    "Candidate",
    "Evaluation",
    "Decision",
    "Population",
    "CampaignReport",
    "parse",
    "mutate",
    "evaluate",
    "retain_decision",
    "run_campaign",
    "LeakageFuzzer",
    "WALL_CLOCK_FIELDS",
]

log = logging.getLogger(__name__)

MAX_STACK = 8
MAX_ARITH = 35
SEED_REDRAWS = 100
WITNESS_WEIGHT = 3


@dataclass
class CampaignConfig:
    """Settings of one fuzzing campaign.

    ``max_evals`` bounds the number of mutated candidates evaluated, which
    makes a run reproducible independent of machine speed; ``stop_at_k``
    ends the run once the highscore reaches that many classes.
    """

    target: str = "prefix_compare"
    target_params: dict = field(default_factory=dict)
    K: int = 100
    epsilon: int = 1
    timeout: float = 1800.0
    partition: str = "greedy"
    rng_seed: int = 0
    initial_seeds: Optional[list] = None
    stats_interval: float = 5.0
    max_evals: Optional[int] = None
    stop_at_k: Optional[int] = None
    cache_size: int = 1 << 16

    def validate(self) -> "CampaignConfig":
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        self.epsilon = check_epsilon(self.epsilon)
        if self.partition not in PARTITION_ALGORITHMS:
            raise ValueError(
                f"partition must be one of {sorted(PARTITION_ALGORITHMS)}, got {self.partition!r}"
            )
        if self.timeout is None or self.timeout < 0:
            raise ValueError(f"timeout must be >= 0 seconds, got {self.timeout!r}")
        if self.max_evals is not None and self.max_evals < 0:
            raise ValueError("max_evals must be >= 0")
        if self.stop_at_k is not None and self.stop_at_k < 1:
            raise ValueError("stop_at_k must be >= 1")
        if self.stats_interval <= 0:
            raise ValueError("stats_interval must be positive")
        if self.initial_seeds is not None and not len(self.initial_seeds):
            raise ValueError("initial_seeds must be None (random) or non-empty")
        return self

    def build_target(self) -> TargetSpec:
        return get_target(self.target, **self.target_params)


@dataclass(frozen=True)
class InputLayout:
    """How a raw buffer maps onto (public, secret_1 .. secret_K)."""

    public_length: int
    secret_length: int
    K: int
    alphabet: bytes

    @classmethod
    def for_target(cls, target: TargetSpec, K: int) -> "InputLayout":
        return cls(target.public_length, target.secret_length, K, target.alphabet)

    @property
    def needed(self) -> int:
        return self.public_length + self.K * self.secret_length

    @property
    def field_starts(self) -> list[int]:
        starts = [0] if self.public_length else []
        starts += [self.public_length + i * self.secret_length for i in range(self.K)]
        return starts

    @property
    def fold_table(self) -> bytes:
        return _fold_table(self.alphabet)


@lru_cache(maxsize=64)
def _fold_table(alphabet: bytes) -> bytes:
    allowed = set(alphabet)
    return bytes(b if b in allowed else alphabet[b % len(alphabet)] for b in range(256))


def _materialize(raw: bytes, needed: int) -> bytes:
    if not raw:
        return bytes(needed)
    if len(raw) >= needed:
        return bytes(raw[:needed])
    reps = -(-needed // len(raw))
    return (bytes(raw) * reps)[:needed]


def parse(raw: bytes, layout: InputLayout) -> tuple[bytes, list[bytes]]:
    """Split ``raw`` into the public input and K secrets.

    Short buffers repeat cyclically from their start (an empty buffer reads
    as zero bytes), surplus bytes are ignored, and bytes outside the
    target alphabet fold to ``alphabet[b % len(alphabet)]``.
    """
    data = _materialize(raw, layout.needed)
    if len(layout.alphabet) < 256:
        data = data.translate(layout.fold_table)
    p, s = layout.public_length, layout.secret_length
    public = data[:p]
    secrets = [data[p + i * s : p + (i + 1) * s] for i in range(layout.K)]
    return public, secrets


# -- mutation operators: (buf, rng, layout, others) -> bytearray --------------


def _bit_flip(buf, rng, layout, others):
    pos = rng.randrange(len(buf) * 8)
    buf[pos >> 3] ^= 1 << (pos & 7)
    return buf


def _byte_flip(buf, rng, layout, others):
    buf[rng.randrange(len(buf))] ^= 0xFF
    return buf


def _random_byte(buf, rng, layout, others):
    buf[rng.randrange(len(buf))] = rng.randrange(256)
    return buf


def _arith(buf, rng, layout, others):
    pos = rng.randrange(len(buf))
    step = rng.randint(1, MAX_ARITH)
    if rng.random() < 0.5:
        step = -step
    buf[pos] = (buf[pos] + step) & 0xFF
    return buf


def _block_delete(buf, rng, layout, others):
    if len(buf) < 2:
        return buf
    length = rng.randint(1, min(32, len(buf) - 1))
    pos = rng.randrange(len(buf) - length + 1)
    del buf[pos : pos + length]
    return buf


def _block_duplicate(buf, rng, layout, others):
    if rng.random() < 0.5 and layout.secret_length and layout.K > 1:
        # field-aligned overwrite: copy a leading block of one parsed field
        # onto the start of a secret slot
        buf = bytearray(_materialize(bytes(buf), layout.needed)) + buf[layout.needed :]
        starts = layout.field_starts
        src = rng.choice(starts)
        dst = rng.choice(starts[1:] if layout.public_length else starts)
        src_width = layout.public_length if src == 0 and layout.public_length else layout.secret_length
        width = rng.randint(1, min(layout.secret_length, src_width))
        buf[dst : dst + width] = buf[src : src + width]
        return buf
    length = rng.randint(1, min(32, len(buf)))
    src = rng.randrange(len(buf) - length + 1)
    chunk = buf[src : src + length]
    dst = rng.randrange(len(buf) + 1)
    if rng.random() < 0.5:
        buf[dst:dst] = chunk
    else:
        buf[dst : dst + length] = chunk
    return buf


def _crossover(buf, rng, layout, others):
    other = rng.choice(others) if others else bytes(buf)
    limit = min(len(buf), len(other))
    if limit < 1:
        return buf
    a = rng.randrange(limit)
    b = rng.randrange(a, limit) + 1
    buf[a:b] = other[a:b]
    return buf


_OPERATORS = (
    _bit_flip,
    _byte_flip,
    _random_byte,
    _arith,
    _block_delete,
    _block_duplicate,
    _crossover,
)


def mutate(
    parent: bytes,
    rng: random.Random,
    layout: InputLayout,
    others: Sequence[bytes] = (),
) -> bytes:
    """Apply a stack of 1-8 random operators to ``parent``.

    ``others`` are crossover partners; with none available the parent
    crosses with itself. The result has length in ``[1, 4 * layout.needed]``.
    """
    buf = bytearray(parent) if parent else bytearray(1)
    for _ in range(rng.randint(1, MAX_STACK)):
        buf = _OPERATORS[rng.randrange(len(_OPERATORS))](buf, rng, layout, others)
    cap = max(1, 4 * layout.needed)
    if len(buf) > cap:
        del buf[cap:]
    if not buf:
        buf.append(0)
    return bytes(buf)


# -- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class Evaluation:
    k: int
    delta: int
    coverage: frozenset
    public: bytes
    secrets: tuple
    costs: tuple
    partitioning: Optional[Partitioning]
    fault: Optional[TargetFaultError] = None


def evaluate(
    raw: bytes,
    target: TargetSpec,
    layout: InputLayout,
    epsilon: int,
    partition: str = "greedy",
    runner: Optional[Callable] = None,
) -> Evaluation:
    """Parse, execute all K secrets and partition their costs.

    A target fault gives fitness ``(1, 0)`` with empty coverage.
    """
    public, secrets = parse(raw, layout)
    try:
        traces = batch_execute(target, secrets, public, runner)
    except TargetFaultError as exc:
        log.warning("target fault at secret %s: %s", exc.index, exc)
        return Evaluation(1, 0, frozenset(), public, tuple(secrets), (), None, exc)
    costs = tuple(t.cost for t in traces)
    part = PARTITION_ALGORITHMS[partition](costs, epsilon)
    coverage = frozenset().union(*{t.fingerprint for t in traces})
    return Evaluation(part.k, part.delta, coverage, public, tuple(secrets), costs, part)


class Decision(str, Enum):
    IMPROVES = "improves"
    COVERAGE_ONLY = "coverage_only"
    DISCARD = "discard"


def retain_decision(k_new: int, delta_new: int, new_coverage: bool, highscore: tuple[int, int]) -> Decision:
    k, delta = highscore
    if k_new > k or (k_new == k and delta_new > delta):
        return Decision.IMPROVES
    if new_coverage:
        return Decision.COVERAGE_ONLY
    return Decision.DISCARD


# -- population ---------------------------------------------------------------


@dataclass
class Candidate:
    raw: bytes
    k: int
    delta: int
    discovery_time: float
    iteration: int
    coverage_only: bool = False


class Population:
    """Queue of retained candidates plus the campaign-wide coverage map.

    Scheduling is round-robin over the queue; whenever the cursor reaches
    the current witness it is served three times in a row.
    """

    def __init__(self):
        self.queue: list[Candidate] = []
        self.coverage: set = set()
        self.highscore: tuple[int, int] = (1, 0)
        self.witness: Optional[Candidate] = None
        self._cursor = 0
        self._bonus = 0

    def add(self, candidate: Candidate) -> None:
        self.queue.append(candidate)

    def pick(self) -> Candidate:
        if self._bonus and self.witness is not None:
            self._bonus -= 1
            return self.witness
        cand = self.queue[self._cursor % len(self.queue)]
        self._cursor += 1
        if cand is self.witness:
            self._bonus = WITNESS_WEIGHT - 1
        return cand


# -- campaign -----------------------------------------------------------------

WALL_CLOCK_FIELDS = ("elapsed_s", "time_to_k_gt1_s", "time_to_best_s", "stop_reason")


@dataclass
class CampaignReport:
    target: str
    target_params: dict
    K: int
    epsilon: int
    partition: str
    rng_seed: int
    timeout: float
    max_evals: Optional[int]
    stop_at_k: Optional[int]
    k_best: int
    delta_best: int
    min_entropy_bits: float
    objective: float
    evaluations: int
    executions: int
    queue_len: int
    coverage_edges: int
    faults: int
    stop_reason: str
    elapsed_s: float
    time_to_k_gt1_s: Optional[float]
    time_to_best_s: float
    witness: dict
    history: list
    retention_log: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def without_timing(self) -> dict:
        """The report minus every wall-clock-dependent field."""
        d = self.to_dict()
        for key in WALL_CLOCK_FIELDS:
            d.pop(key, None)
        d["history"] = [{k: v for k, v in h.items() if k != "elapsed_s"} for h in d["history"]]
        return d


def _random_seed(rng: random.Random, layout: InputLayout) -> bytes:
    alphabet = layout.alphabet
    return bytes(alphabet[rng.randrange(len(alphabet))] for _ in range(max(1, layout.needed)))


def _witness_dict(ev: Evaluation) -> dict:
    classes = []
    if ev.partitioning is not None:
        for cls in ev.partitioning.classes:
            idx = next(i for i, c in enumerate(ev.costs) if cls.min <= c <= cls.max)
            classes.append(
                {
                    "min": cls.min,
                    "max": cls.max,
                    "members": list(cls.members),
                    "count": sum(ev.partitioning.multiplicity[m] for m in cls.members),
                    "representative": ev.secrets[idx].hex(),
                }
            )
    return {
        "public": ev.public.hex(),
        "secrets": [s.hex() for s in ev.secrets],
        "costs": list(ev.costs),
        "classes": classes,
    }


def run_campaign(
    config: CampaignConfig,
    progress: Optional[Callable[[dict], None]] = None,
    target: Optional[TargetSpec] = None,
) -> CampaignReport:
    """Run the mutate / evaluate / retain loop until a budget is exhausted.

    ``progress`` receives a record every ``stats_interval`` seconds and once
    at the end. ``target`` overrides the registry lookup of
    ``config.target``.
    """
    config.validate()
    if target is None:
        target = config.build_target()
    layout = InputLayout.for_target(target, config.K)
    rng = random.Random(config.rng_seed)
    runner = lru_cache(maxsize=config.cache_size)(partial(execute, target))
    score = partial(
        evaluate,
        target=target,
        layout=layout,
        epsilon=config.epsilon,
        partition=config.partition,
        runner=runner,
    )
    start = time.perf_counter()
    clock = lambda: time.perf_counter() - start  # noqa: E731

    pop = Population()
    history: list[dict] = []
    retention_log: list[dict] = []
    evaluations = executions = faults = 0
    witness_eval: Optional[Evaluation] = None
    time_to_k_gt1: Optional[float] = None
    time_to_best = 0.0

    def record_highscore(iteration, ev):
        nonlocal witness_eval, time_to_k_gt1, time_to_best
        t = clock()
        pop.highscore = (ev.k, ev.delta)
        witness_eval = ev
        time_to_best = t
        if ev.k > 1 and time_to_k_gt1 is None:
            time_to_k_gt1 = t
        history.append(
            {"iteration": iteration, "executions": executions, "elapsed_s": t, "k": ev.k, "delta": ev.delta}
        )

    # seeds: Algorithm state starts at (1, 0) and every seed enters the queue
    seeds = [bytes(s) for s in config.initial_seeds] if config.initial_seeds is not None else None
    attempts = 0
    pending = list(seeds) if seeds is not None else []
    while True:
        if seeds is None:
            if pop.queue or attempts >= SEED_REDRAWS:
                break
            raw = _random_seed(rng, layout)
        else:
            if not pending:
                break
            raw = pending.pop(0)
        attempts += 1
        ev = score(raw)
        executions += config.K
        if ev.fault is not None:
            faults += 1
            continue
        cand = Candidate(raw, ev.k, ev.delta, clock(), 0)
        pop.add(cand)
        if retain_decision(ev.k, ev.delta, False, pop.highscore) is Decision.IMPROVES or pop.witness is None:
            pop.witness = cand
            record_highscore(0, ev)
        pop.coverage |= ev.coverage
    if not pop.queue:
        raise CampaignAbortError(
            f"no initial seed for {target.name} executed without a target fault "
            f"({attempts} tried)"
        )

    def emit():
        if progress is not None:
            progress(
                {
                    "elapsed_s": round(clock(), 3),
                    "k_best": pop.highscore[0],
                    "delta_best": pop.highscore[1],
                    "executions": executions,
                    "queue_len": len(pop.queue),
                    "coverage_edges": len(pop.coverage),
                }
            )

    next_stats = config.stats_interval
    stop_reason = "timeout"
    while True:
        if config.stop_at_k is not None and pop.highscore[0] >= config.stop_at_k:
            stop_reason = "stop_at_k"
            break
        if config.max_evals is not None and evaluations >= config.max_evals:
            stop_reason = "max_evals"
            break
        if clock() >= config.timeout:
            stop_reason = "timeout"
            break
        parent = pop.pick()
        partner_pool = [c.raw for c in pop.queue]
        child = mutate(parent.raw, rng, layout, partner_pool)
        evaluations += 1
        ev = score(child)
        executions += config.K
        if ev.fault is not None:
            faults += 1
        new_cov = not ev.coverage <= pop.coverage
        decision = retain_decision(ev.k, ev.delta, new_cov, pop.highscore)
        if decision is not Decision.DISCARD:
            before = len(pop.coverage)
            pop.coverage |= ev.coverage
            cand = Candidate(child, ev.k, ev.delta, clock(), evaluations, decision is Decision.COVERAGE_ONLY)
            pop.add(cand)
            if decision is Decision.IMPROVES:
                pop.witness = cand
                record_highscore(evaluations, ev)
            retention_log.append(
                {
                    "iteration": evaluations,
                    "decision": decision.value,
                    "k": ev.k,
                    "delta": ev.delta,
                    "coverage_before": before,
                    "coverage_after": len(pop.coverage),
                }
            )
        if clock() >= next_stats:
            emit()
            next_stats = clock() + config.stats_interval
    emit()

    k_best, delta_best = pop.highscore
    return CampaignReport(
        target=target.name,
        target_params=dict(target.params),
        K=config.K,
        epsilon=config.epsilon,
        partition=config.partition,
        rng_seed=config.rng_seed,
        timeout=config.timeout,
        max_evals=config.max_evals,
        stop_at_k=config.stop_at_k,
        k_best=k_best,
        delta_best=delta_best,
        min_entropy_bits=min_entropy(k_best),
        objective=objective_score(k_best, delta_best),
        evaluations=evaluations,
        executions=executions,
        queue_len=len(pop.queue),
        coverage_edges=len(pop.coverage),
        faults=faults,
        stop_reason=stop_reason,
        elapsed_s=clock(),
        time_to_k_gt1_s=time_to_k_gt1,
        time_to_best_s=time_to_best,
        witness=_witness_dict(witness_eval),
        history=history,
        retention_log=retention_log,
    )


class LeakageFuzzer(BaseEstimator):
    """Estimator front end for :func:`run_campaign`.

    ``fit`` runs one campaign; ``X``, when given, is an iterable of raw seed
    buffers. The fitted witness public input then defines the observation
    classes used by ``transform`` (secrets to costs) and ``predict``
    (secrets to class index, ``-1`` outside every class).

    Parameters
    ----------
    target : str, default="prefix_compare"
    target_params : dict or None
    K : int, default=100
    epsilon : int, default=1
    timeout : float, default=1800.0
        Wall-clock budget in seconds.
    partition : {"greedy", "kdynamic"}, default="greedy"
    random_state : int or None
    max_evals, stop_at_k : int or None
        Optional evaluation and class-count budgets.
    """

    def __init__(
        self,
        target="prefix_compare",
        target_params=None,
        K=100,
        epsilon=1,
        timeout=1800.0,
        partition="greedy",
        random_state=None,
        max_evals=None,
        stop_at_k=None,
    ):
        self.target = target
        self.target_params = target_params
        self.K = K
        self.epsilon = epsilon
        self.timeout = timeout
        self.partition = partition
        self.random_state = random_state
        self.max_evals = max_evals
        self.stop_at_k = stop_at_k

    def fit(self, X=None, y=None):
        seed = self.random_state
        if seed is None:
            seed = int(np.random.default_rng().integers(2**63))
        config = CampaignConfig(
            target=self.target,
            target_params=dict(self.target_params or {}),
            K=self.K,
            epsilon=self.epsilon,
            timeout=self.timeout,
            partition=self.partition,
            rng_seed=int(seed),
            initial_seeds=None if X is None else [bytes(x) for x in X],
            max_evals=self.max_evals,
            stop_at_k=self.stop_at_k,
        )
        self.target_ = config.build_target()
        self.report_ = run_campaign(config, target=self.target_)
        w = self.report_.witness
        self.witness_public_ = bytes.fromhex(w["public"])
        self.witness_secrets_ = [bytes.fromhex(s) for s in w["secrets"]]
        self.partitioning_ = PARTITION_ALGORITHMS[self.partition](w["costs"], config.epsilon)
        self.k_ = self.report_.k_best
        self.delta_ = self.report_.delta_best
        self.min_entropy_ = self.report_.min_entropy_bits
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "report_")
        costs = [execute(self.target_, bytes(s), self.witness_public_).cost for s in X]
        return np.asarray(costs, dtype=np.int64).reshape(-1, 1)

    def predict(self, X) -> np.ndarray:
        costs = self.transform(X)[:, 0]
        return np.array([self.partitioning_.class_index(int(c)) for c in costs], dtype=np.intp)

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "report_")
        return self.min_entropy_
