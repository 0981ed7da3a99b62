"""Deterministic execution of probe-instrumented targets.

A target is a plain function ``run(secret, public, probe)``. It reports
abstract cost with ``probe.tick(units)`` and control flow with
``probe.visit(location)``. Locations are 16-bit ids chosen by the target
author; consecutive visits are folded into AFL-style edge ids, and the
per-edge hit counts are bucketed into a coverage fingerprint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .errors import RejectedInputError, TargetFaultError

__all__ = [
    "MAP_SIZE",
    "Probe",
    "CostTrace",
    "TargetSpec",
    "hit_bucket",
    "execute",
    "batch_execute",
]

MAP_SIZE = 1 << 16
_MAP_MASK = MAP_SIZE - 1

# AFL hit-count classes: 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+
_BUCKET_LIMITS = (1, 2, 3, 7, 15, 31, 127)


def hit_bucket(count: int) -> int:
    for i, limit in enumerate(_BUCKET_LIMITS):
        if count <= limit:
            return i + 1
    return len(_BUCKET_LIMITS) + 1


class Probe:
    """Per-execution cost counter and edge map."""

    __slots__ = ("cost", "hits", "_prev")

    def __init__(self):
        self.cost = 0
        self.hits: dict[int, int] = {}
        self._prev = 0

    def tick(self, units: int = 1) -> None:
        if units < 0:
            raise ValueError("cost only increases")
        self.cost += units

    def visit(self, location: int) -> None:
        edge = (location ^ self._prev) & _MAP_MASK
        hits = self.hits
        hits[edge] = hits.get(edge, 0) + 1
        self._prev = (location & _MAP_MASK) >> 1

    def trace(self) -> "CostTrace":
        return CostTrace(
            self.cost,
            frozenset((edge, hit_bucket(n)) for edge, n in self.hits.items()),
        )


@dataclass(frozen=True)
class CostTrace:
    cost: int
    fingerprint: frozenset


@dataclass(frozen=True)
class TargetSpec:
    """A registered benchmark program and its input layout.

    ``alphabet`` lists the byte values a valid secret or public input may
    contain. ``expected_cost`` is the documented closed-form cost equation
    and ``ground_truth`` the analytic class count as a function of epsilon
    (``None`` where no formula is documented for that epsilon).
    """

    name: str
    run: Callable[[bytes, bytes, Probe], object] = field(repr=False)
    secret_length: int
    public_length: int
    alphabet: bytes = field(repr=False)
    constraint: str
    params: Mapping[str, int] = field(default_factory=dict)
    expected_cost: Optional[Callable[[bytes, bytes], int]] = field(default=None, repr=False)
    ground_truth: Optional[Callable[[int], Optional[int]]] = field(default=None, repr=False)
    ground_truth_formula: str = ""
    ideal_public: bytes = b""
    sweep_alphabet: Optional[bytes] = field(default=None, repr=False)
    sweep: Optional[Callable[[], Iterable[bytes]]] = field(default=None, repr=False)
    sweep_count: Optional[int] = None
    description: str = ""

    def check_inputs(self, secret: bytes, public: bytes) -> None:
        if len(secret) != self.secret_length:
            raise RejectedInputError(
                f"{self.name}: secret must be {self.secret_length} bytes, got {len(secret)}"
            )
        if len(public) != self.public_length:
            raise RejectedInputError(
                f"{self.name}: public must be {self.public_length} bytes, got {len(public)}"
            )
        if len(self.alphabet) < 256:
            if secret.translate(None, self.alphabet) or public.translate(None, self.alphabet):
                raise RejectedInputError(f"{self.name}: input byte outside the target alphabet")

    def sweep_size(self) -> int:
        if self.sweep_count is not None:
            return self.sweep_count
        alphabet = self.sweep_alphabet if self.sweep_alphabet is not None else self.alphabet
        return len(alphabet) ** self.secret_length

    def sweep_secrets(self) -> Iterator[bytes]:
        """Every secret of the exhaustive sweep, in a fixed order."""
        if self.sweep is not None:
            yield from self.sweep()
            return
        alphabet = self.sweep_alphabet if self.sweep_alphabet is not None else self.alphabet
        for combo in product(alphabet, repeat=self.secret_length):
            yield bytes(combo)


def execute(target: TargetSpec, secret: bytes, public: bytes) -> CostTrace:
    """Run ``target`` once on a fresh probe and return its trace."""
    secret = bytes(secret)
    public = bytes(public)
    target.check_inputs(secret, public)
    probe = Probe()
    try:
        target.run(secret, public, probe)
    except RejectedInputError:
        raise
    except Exception as exc:
        raise TargetFaultError(target.name, secret, public) from exc
    return probe.trace()


def batch_execute(
    target: TargetSpec,
    secrets: Sequence[bytes],
    public: bytes,
    runner: Optional[Callable[[bytes, bytes], CostTrace]] = None,
) -> list[CostTrace]:
    """Execute every secret under one public input, preserving order.

    ``runner`` replaces :func:`execute` (e.g. a memoized wrapper); errors
    are re-raised with ``index`` set to the failing position.
    """
    if not secrets:
        raise ValueError("batch_execute needs at least one secret")
    run = runner if runner is not None else (lambda s, p: execute(target, s, p))
    traces = []
    for i, secret in enumerate(secrets):
        try:
            traces.append(run(secret, public))
        except (RejectedInputError, TargetFaultError) as exc:
            exc.index = i
            raise
    return traces
