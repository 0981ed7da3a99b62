"""JSON Schemas for the machine-readable CLI outputs.

``leakfuzz schema <name>`` prints them; the test suite validates real
outputs against them.
"""

from __future__ import annotations

__all__ = ["REPORT_SCHEMA", "PROGRESS_SCHEMA", "BENCH_SUMMARY_SCHEMA", "SCHEMAS"]

_DRAFT = "https://json-schema.org/draft/2020-12/schema"

_count = {"type": "integer", "minimum": 0}
_seconds = {"type": "number", "minimum": 0}
_hex = {"type": "string", "pattern": "^([0-9a-f]{2})*$"}

PROGRESS_SCHEMA = {
    "$schema": _DRAFT,
    "title": "campaign progress record",
    "type": "object",
    "required": ["elapsed_s", "k_best", "delta_best", "executions", "queue_len", "coverage_edges"],
    "additionalProperties": False,
    "properties": {
        "elapsed_s": _seconds,
        "k_best": {"type": "integer", "minimum": 1},
        "delta_best": _count,
        "executions": _count,
        "queue_len": _count,
        "coverage_edges": _count,
    },
}

_class = {
    "type": "object",
    "required": ["min", "max", "members", "count", "representative"],
    "additionalProperties": False,
    "properties": {
        "min": _count,
        "max": _count,
        "members": {"type": "array", "items": _count, "minItems": 1},
        "count": {"type": "integer", "minimum": 1},
        "representative": _hex,
    },
}

REPORT_SCHEMA = {
    "$schema": _DRAFT,
    "title": "campaign report",
    "type": "object",
    "additionalProperties": False,
    "required": [
        "target", "target_params", "K", "epsilon", "partition", "rng_seed", "timeout",
        "max_evals", "stop_at_k", "k_best", "delta_best", "min_entropy_bits", "objective",
        "evaluations", "executions", "queue_len", "coverage_edges", "faults", "stop_reason",
        "elapsed_s", "time_to_k_gt1_s", "time_to_best_s", "witness", "history", "retention_log",
    ],
    "properties": {
        "target": {"type": "string"},
        "target_params": {"type": "object"},
        "K": {"type": "integer", "minimum": 1},
        "epsilon": _count,
        "partition": {"enum": ["greedy", "kdynamic"]},
        "rng_seed": {"type": "integer"},
        "timeout": _seconds,
        "max_evals": {"type": ["integer", "null"], "minimum": 0},
        "stop_at_k": {"type": ["integer", "null"], "minimum": 1},
        "k_best": {"type": "integer", "minimum": 1},
        "delta_best": _count,
        "min_entropy_bits": {"type": "number", "minimum": 0},
        "objective": {"type": "number", "minimum": 1},
        "evaluations": _count,
        "executions": _count,
        "queue_len": {"type": "integer", "minimum": 1},
        "coverage_edges": _count,
        "faults": _count,
        "stop_reason": {"enum": ["timeout", "max_evals", "stop_at_k"]},
        "elapsed_s": _seconds,
        "time_to_k_gt1_s": {"type": ["number", "null"], "minimum": 0},
        "time_to_best_s": _seconds,
        "witness": {
            "type": "object",
            "required": ["public", "secrets", "costs", "classes"],
            "additionalProperties": False,
            "properties": {
                "public": _hex,
                "secrets": {"type": "array", "items": _hex, "minItems": 1},
                "costs": {"type": "array", "items": _count, "minItems": 1},
                "classes": {"type": "array", "items": _class, "minItems": 1},
            },
        },
        "history": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["iteration", "executions", "elapsed_s", "k", "delta"],
                "additionalProperties": False,
                "properties": {
                    "iteration": _count,
                    "executions": _count,
                    "elapsed_s": _seconds,
                    "k": {"type": "integer", "minimum": 1},
                    "delta": _count,
                },
            },
        },
        "retention_log": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["iteration", "decision", "k", "delta", "coverage_before", "coverage_after"],
                "additionalProperties": False,
                "properties": {
                    "iteration": {"type": "integer", "minimum": 1},
                    "decision": {"enum": ["improves", "coverage_only"]},
                    "k": {"type": "integer", "minimum": 1},
                    "delta": _count,
                    "coverage_before": _count,
                    "coverage_after": _count,
                },
            },
        },
    },
}

_optional_seconds = {"type": ["number", "null"], "minimum": 0}

BENCH_SUMMARY_SCHEMA = {
    "$schema": _DRAFT,
    "title": "benchmark summary",
    "type": "object",
    "required": ["confidence_interval", "rows"],
    "properties": {
        "confidence_interval": {
            "type": "object",
            "required": ["label", "formula", "degrees_of_freedom"],
            "properties": {
                "label": {"type": "string"},
                "formula": {"type": "string"},
                "degrees_of_freedom": {"type": "string"},
            },
        },
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "target", "epsilon", "K", "reps", "p_mean", "p_ci95", "p_max", "delta_at_pmax",
                    "t_kgt1_mean_s", "t_pmax_mean_s", "t_pmax_min_s", "requested_reps", "excluded",
                    "failures", "seeds",
                ],
                "properties": {
                    "target": {"type": "string"},
                    "epsilon": _count,
                    "K": {"type": "integer", "minimum": 1},
                    "reps": _count,
                    "p_mean": {"type": ["number", "null"]},
                    "p_ci95": {"type": ["number", "null"], "minimum": 0},
                    "p_max": {"type": ["integer", "null"]},
                    "delta_at_pmax": {"type": ["integer", "null"]},
                    "t_kgt1_mean_s": _optional_seconds,
                    "t_pmax_mean_s": _optional_seconds,
                    "t_pmax_min_s": _optional_seconds,
                    "requested_reps": {"type": "integer", "minimum": 1},
                    "excluded": _count,
                    "failures": {"type": "array", "items": {"type": "object"}},
                    "seeds": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
    },
}

SCHEMAS = {
    "report": REPORT_SCHEMA,
    "progress": PROGRESS_SCHEMA,
    "summary": BENCH_SUMMARY_SCHEMA,
}
