"""Benchmark corpus of leaking and constant-time reference programs.

Every target reports cost through explicit probe calls with the constants
listed next to it, so each one has a closed-form cost equation and an
analytic count of epsilon-distinguishable classes. String targets share the
printable ASCII alphabet (0x20-0x7E); ``encoding_length_compare`` adds byte
0x80 as a stand-in for a character that encodes to two bytes.

Cost units are instruction-like blocks for the string and bit targets and
visited branches for ``modpow``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import BudgetExceededError, LeakFuzzError, RejectedInputError
from .execution import TargetSpec, execute
from .partition import PARTITION_ALGORITHMS, check_epsilon

__all__ = [
    "PRINTABLE",
    "MULTIBYTE_SENTINEL",
    "TARGETS",
    "register_target",
    "get_target",
    "list_targets",
    "target_parameters",
    "UnknownTargetError",
    "GroundTruthCheck",
    "verify_ground_truth",
    "modpow_branch_cost",
]

PRINTABLE = bytes(range(0x20, 0x7F))
MULTIBYTE_SENTINEL = 0x80
FULL_BYTES = bytes(range(256))
# 16 symbols keep exhaustive sweeps at 16**L secrets
_SWEEP_LETTERS = b"ABCDEFGHIJKLMNOP"


class UnknownTargetError(LeakFuzzError, KeyError):
    pass


def _evenly_spaced_classes(n_values: int, step: int, epsilon: int) -> int:
    # greedy packs floor(eps/step) + 1 consecutive values per class
    return math.ceil(n_values / (epsilon // step + 1))


def _common_prefix(a: bytes, b: bytes) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def _check_length(name, value, low, high):
    if not isinstance(value, int) or not low <= value <= high:
        raise RejectedInputError(f"{name} must be an integer in {low}..{high}, got {value!r}")


# prefix_compare: early exit on the first mismatching character.
#   entry 4, +3 per matched character, exit 2
#   cost = 6 + 3 * common_prefix(secret, public)
_PC_ENTRY, _PC_ITER, _PC_EXIT = 4, 3, 2


def _prefix_compare(secret, public, probe):
    probe.tick(_PC_ENTRY)
    probe.visit(0x5A11)
    for i in range(len(public)):
        probe.visit(0x1C3D)
        if secret[i] != public[i]:
            probe.visit(0x7E02)
            probe.tick(_PC_EXIT)
            return False
        probe.tick(_PC_ITER)
    probe.visit(0x33F4)
    probe.tick(_PC_EXIT)
    return True


def prefix_compare(length: int = 16) -> TargetSpec:
    _check_length("length", length, 1, 64)
    return TargetSpec(
        name="prefix_compare",
        run=_prefix_compare,
        secret_length=length,
        public_length=length,
        alphabet=PRINTABLE,
        constraint=f"secret and public are {length} printable characters",
        params={"length": length},
        expected_cost=lambda s, y: _PC_ENTRY + _PC_EXIT + _PC_ITER * _common_prefix(s, y),
        ground_truth=lambda eps: _evenly_spaced_classes(length + 1, _PC_ITER, eps),
        ground_truth_formula="ceil((L+1) / (eps//3 + 1)); L+1 for eps < 3",
        ideal_public=b"A" * length,
        sweep_alphabet=_SWEEP_LETTERS,
        description="early-return string equality; leaks the matched prefix length",
    )


# unbalanced_full_compare: always scans every position, but a match costs
# one extra unit (the fall-through jump).
#   entry 5, +4 per position, +1 per matching position, exit 3
#   cost = 8 + 4 * L + matches(secret, public)
_UC_ENTRY, _UC_ITER, _UC_MATCH, _UC_EXIT = 5, 4, 1, 3


def _unbalanced_full_compare(secret, public, probe):
    probe.tick(_UC_ENTRY)
    probe.visit(0x2B61)
    for i in range(len(public)):
        probe.visit(0x4D90)
        probe.tick(_UC_ITER)
        if secret[i] == public[i]:
            probe.visit(0x6A17)
            probe.tick(_UC_MATCH)
        else:
            probe.visit(0x0F5C)
    probe.visit(0x3E88)
    probe.tick(_UC_EXIT)
    return secret == public


def unbalanced_full_compare(length: int = 16) -> TargetSpec:
    _check_length("length", length, 1, 64)
    return TargetSpec(
        name="unbalanced_full_compare",
        run=_unbalanced_full_compare,
        secret_length=length,
        public_length=length,
        alphabet=PRINTABLE,
        constraint=f"secret and public are {length} printable characters",
        params={"length": length},
        expected_cost=lambda s, y: _UC_ENTRY
        + _UC_EXIT
        + _UC_ITER * len(y)
        + _UC_MATCH * sum(a == b for a, b in zip(s, y)),
        ground_truth=lambda eps: _evenly_spaced_classes(length + 1, _UC_MATCH, eps),
        ground_truth_formula="ceil((L+1) / (eps + 1))",
        ideal_public=b"A" * length,
        sweep_alphabet=_SWEEP_LETTERS,
        description="full-length loop with a one-unit imbalance per matching character",
    )


# constant_time_compare: xor-accumulate over every position, no
# secret-dependent branch.
#   entry 6, +7 per position, exit 3
#   cost = 9 + 7 * L
_CT_ENTRY, _CT_ITER, _CT_EXIT = 6, 7, 3


def _constant_time_compare(secret, public, probe):
    probe.tick(_CT_ENTRY)
    probe.visit(0x1977)
    l1, l2 = len(secret), len(public)
    result = l1 - l2
    for i in range(l2):
        probe.visit(0x58A3)
        probe.tick(_CT_ITER)
        r = ((i - l1) >> 31 & 1) * i
        result |= secret[r] ^ public[i]
    probe.visit(0x24C6)
    probe.tick(_CT_EXIT)
    return result == 0


def constant_time_compare(length: int = 16) -> TargetSpec:
    _check_length("length", length, 1, 64)
    return TargetSpec(
        name="constant_time_compare",
        run=_constant_time_compare,
        secret_length=length,
        public_length=length,
        alphabet=PRINTABLE,
        constraint=f"secret and public are {length} printable characters",
        params={"length": length},
        expected_cost=lambda s, y: _CT_ENTRY + _CT_EXIT + _CT_ITER * len(y),
        ground_truth=lambda eps: 1,
        ground_truth_formula="1",
        ideal_public=b"A" * length,
        sweep_alphabet=_SWEEP_LETTERS,
        description="xor-accumulating comparison; safe",
    )


# encoding_length_compare: compares encoded byte lengths first and returns
# early on a mismatch; byte 0x80 encodes to two bytes.
#   entry 4, +2 per character of each string for encoding,
#   early exit 2, or +9 per encoded byte of the public input + 5 loop exit, then exit 2
#   cost = 6 + 4 * L                           (encoded lengths differ)
#   cost = 6 + 4 * L + 9 * enc_len(public) + 5 (encoded lengths equal)
_EL_ENTRY, _EL_ENCODE, _EL_ITER, _EL_LOOP_EXIT, _EL_EXIT = 4, 2, 9, 5, 2


def _encoded_length(data: bytes) -> int:
    return len(data) + data.count(MULTIBYTE_SENTINEL)


def _encoding_length_compare(secret, public, probe):
    probe.tick(_EL_ENTRY)
    probe.visit(0x0C21)
    probe.tick(_EL_ENCODE * (len(secret) + len(public)))
    len1 = _encoded_length(secret)
    len2 = _encoded_length(public)
    if len1 != len2:
        probe.visit(0x7713)
        probe.tick(_EL_EXIT)
        return False
    result = 0
    enc1 = secret.replace(b"\x80", b"\xc3\xa9")
    enc2 = public.replace(b"\x80", b"\xc3\xa9")
    for i in range(len2):
        probe.visit(0x4F5E)
        probe.tick(_EL_ITER)
        result |= enc1[i] ^ enc2[i]
    probe.visit(0x61B0)
    probe.tick(_EL_LOOP_EXIT + _EL_EXIT)
    return result == 0


def _encoding_expected_cost(secret, public):
    base = _EL_ENTRY + _EL_ENCODE * (len(secret) + len(public)) + _EL_EXIT
    if _encoded_length(secret) != _encoded_length(public):
        return base
    return base + _EL_ITER * _encoded_length(public) + _EL_LOOP_EXIT


def encoding_length_compare(length: int = 16) -> TargetSpec:
    _check_length("length", length, 1, 64)
    skipped = _EL_ITER * length + _EL_LOOP_EXIT
    return TargetSpec(
        name="encoding_length_compare",
        run=_encoding_length_compare,
        secret_length=length,
        public_length=length,
        alphabet=PRINTABLE + bytes([MULTIBYTE_SENTINEL]),
        constraint=f"secret and public are {length} characters (printable or 0x80)",
        params={"length": length},
        expected_cost=_encoding_expected_cost,
        ground_truth=lambda eps: 2 if eps < skipped else 1,
        ground_truth_formula=f"2 for eps < 9*L+5 (= {skipped}), else 1",
        ideal_public=b"A" * length,
        sweep_alphabet=_SWEEP_LETTERS[:15] + bytes([MULTIBYTE_SENTINEL]),
        description="early return when UTF-8 byte lengths differ; leaks presence of a multi-byte character",
    )


# leak_set_bits: loops over the n low bits of the secret, doing extra work
# for each set bit.
#   entry 3, +2 per bit, +5 per set bit
#   cost = 3 + 2 * n + 5 * popcount(secret mod 2**n)
_LS_ENTRY, _LS_BIT, _LS_SET = 3, 2, 5


def _secret_int(secret: bytes, bits: int) -> int:
    return int.from_bytes(secret, "little") & ((1 << bits) - 1)


def leak_set_bits(n_bits: int = 12) -> TargetSpec:
    _check_length("n_bits", n_bits, 1, 64)
    n_bytes = (n_bits + 7) // 8

    def run(secret, public, probe):
        value = _secret_int(secret, n_bits)
        probe.tick(_LS_ENTRY)
        probe.visit(0x3A07)
        for i in range(n_bits):
            probe.tick(_LS_BIT)
            if value >> i & 1:
                probe.visit(0x6C49)
                probe.tick(_LS_SET)
            else:
                probe.visit(0x12D5)
        probe.visit(0x5F3B)
        return value

    def sweep():
        for value in range(1 << n_bits):
            yield value.to_bytes(n_bytes, "little")

    return TargetSpec(
        name="leak_set_bits",
        run=run,
        secret_length=n_bytes,
        public_length=0,
        alphabet=FULL_BYTES,
        constraint=f"secret is a {n_bits}-bit vector in {n_bytes} bytes (little-endian); no public input",
        params={"n_bits": n_bits},
        expected_cost=lambda s, y: _LS_ENTRY + _LS_BIT * n_bits + _LS_SET * bin(_secret_int(s, n_bits)).count("1"),
        ground_truth=lambda eps: _evenly_spaced_classes(n_bits + 1, _LS_SET, eps),
        ground_truth_formula="ceil((n+1) / (eps//5 + 1)); n+1 for eps < 5",
        ideal_public=b"",
        sweep=sweep,
        sweep_count=1 << n_bits,
        description="leaks the number of set bits of the secret",
    )


# modpow: left-to-right square-and-multiply over the exponent's bit length.
# Cost counts visited branches: the loop guard (width + 1 times), the bit
# test (width times) and the multiply branch (once per set bit).
#   cost = 2 * bit_length(e) + 1 + popcount(e)
# Exponents of Len bits realise {1} for e = 0 and 2w+1 .. 3w+1 for width w,
# which is 3 * (Len - 1) + 1 distinct costs for Len >= 2.
def modpow_branch_cost(exponent: int) -> int:
    return 2 * exponent.bit_length() + 1 + bin(exponent).count("1")


def modpow(length_bits: int = 3, modulus: int = 1717) -> TargetSpec:
    _check_length("length_bits", length_bits, 1, 16)
    if not isinstance(modulus, int) or modulus < 2:
        raise RejectedInputError(f"modulus must be an integer >= 2, got {modulus!r}")
    n_bytes = (length_bits + 7) // 8

    def run(secret, public, probe):
        exponent = _secret_int(secret, length_bits)
        base = int.from_bytes(public, "little") % modulus
        width = exponent.bit_length()
        s = 1
        i = 0
        while True:
            probe.visit(0x2E4D)
            probe.tick()
            if i >= width:
                break
            s = s * s % modulus
            probe.visit(0x7A31)
            probe.tick()
            if exponent >> (width - i - 1) & 1:
                probe.visit(0x0B96)
                probe.tick()
                s = s * base % modulus
            i += 1
        return s

    def sweep():
        for value in range(1 << length_bits):
            yield value.to_bytes(n_bytes, "little")

    def ground_truth(eps):
        if eps != 0:
            return None
        return 2 if length_bits == 1 else 3 * (length_bits - 1) + 1

    return TargetSpec(
        name="modpow",
        run=run,
        secret_length=n_bytes,
        public_length=2,
        alphabet=FULL_BYTES,
        constraint=(
            f"secret is a {length_bits}-bit exponent in {n_bytes} bytes (little-endian); "
            f"public is a 2-byte base, reduced mod {modulus}"
        ),
        params={"length_bits": length_bits, "modulus": modulus},
        expected_cost=lambda s, y: modpow_branch_cost(_secret_int(s, length_bits)),
        ground_truth=ground_truth,
        ground_truth_formula="eps=0: 3*(Len-1)+1 for Len >= 2, 2 for Len = 1",
        ideal_public=(2).to_bytes(2, "little"),
        sweep=sweep,
        sweep_count=1 << length_bits,
        description="square-and-multiply modular exponentiation; branch count leaks bit length and popcount",
    )


TARGETS: dict[str, Callable[..., TargetSpec]] = {
    "prefix_compare": prefix_compare,
    "unbalanced_full_compare": unbalanced_full_compare,
    "constant_time_compare": constant_time_compare,
    "encoding_length_compare": encoding_length_compare,
    "leak_set_bits": leak_set_bits,
    "modpow": modpow,
}


def register_target(name: str, factory: Callable[..., TargetSpec]) -> None:
    """Add a target factory to the registry; it must return a TargetSpec named ``name``."""
    if name in TARGETS:
        raise ValueError(f"target {name!r} already registered")
    TARGETS[name] = factory


def get_target(name: str, **params) -> TargetSpec:
    try:
        factory = TARGETS[name]
    except KeyError:
        raise UnknownTargetError(f"unknown target {name!r}; known: {', '.join(sorted(TARGETS))}") from None
    params = {k: v for k, v in params.items() if v is not None}
    return factory(**params)


def target_parameters(name: str) -> dict[str, object]:
    """Default parameters of a registered target, by inspecting its factory."""
    import inspect

    sig = inspect.signature(TARGETS[name])
    return {p.name: p.default for p in sig.parameters.values()}


def list_targets() -> list[dict]:
    rows = []
    for name in TARGETS:
        spec = get_target(name)
        rows.append(
            {
                "name": name,
                "params": dict(spec.params),
                "secret_length": spec.secret_length,
                "public_length": spec.public_length,
                "constraint": spec.constraint,
                "ground_truth": spec.ground_truth_formula,
                "description": spec.description,
            }
        )
    return rows


DEFAULT_SWEEP_BUDGET = 1 << 16


@dataclass(frozen=True)
class GroundTruthCheck:
    """Outcome of sweeping every secret of a target under its ideal public input."""

    target: str
    params: dict
    epsilon: int
    expected_k: Optional[int]
    observed_k: int
    delta: int
    bounds: list
    secrets_swept: int

    @property
    def passed(self) -> bool:
        return self.expected_k is not None and self.expected_k == self.observed_k


def verify_ground_truth(
    target: TargetSpec,
    epsilon: int,
    partition: str = "greedy",
    budget: int = DEFAULT_SWEEP_BUDGET,
) -> GroundTruthCheck:
    """Execute every sweep secret and compare the class count with the formula.

    Raises :class:`BudgetExceededError` when the sweep is larger than
    ``budget`` executions.
    """
    size = target.sweep_size()
    if size > budget:
        raise BudgetExceededError(
            f"{target.name} sweep needs {size} executions, budget is {budget}; "
            "use a smaller length or raise the budget"
        )
    algorithm = PARTITION_ALGORITHMS[partition]
    eps = check_epsilon(epsilon)
    costs = [execute(target, s, target.ideal_public).cost for s in target.sweep_secrets()]
    part = algorithm(costs, eps)
    expected = target.ground_truth(eps) if target.ground_truth is not None else None
    return GroundTruthCheck(
        target=target.name,
        params=dict(target.params),
        epsilon=eps,
        expected_k=expected,
        observed_k=part.k,
        delta=part.delta,
        bounds=part.bounds(),
        secrets_swept=len(costs),
    )
