"""Greybox fuzzing for min-entropy estimates of cost side channels.

The search looks for one public input and K secrets whose execution costs
fall into as many epsilon-distinguishable classes as possible; ``log2(k)``
of the best count found is a lower bound on the leakage.
"""

from .engine import CampaignConfig, CampaignReport, LeakageFuzzer, run_campaign
from .errors import (
    BudgetExceededError,
    CampaignAbortError,
    LeakFuzzError,
    RejectedInputError,
    TargetFaultError,
)
from .execution import CostTrace, Probe, TargetSpec, batch_execute, execute
from .partition import (
    GreedyPartitioner,
    KDynamicPartitioner,
    Partitioning,
    greedy_partition,
    kdynamic_partition,
    min_entropy,
    oracle_min_partitions,
)
from .targets import TARGETS, get_target, list_targets, register_target, verify_ground_truth

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "CampaignAbortError",
    "CampaignConfig",
    "CampaignReport",
    "CostTrace",
    "GreedyPartitioner",
    "KDynamicPartitioner",
    "LeakFuzzError",
    "LeakageFuzzer",
    "Partitioning",
    "Probe",
    "RejectedInputError",
    "TARGETS",
    "TargetFaultError",
    "TargetSpec",
    "batch_execute",
    "execute",
    "get_target",
    "greedy_partition",
    "kdynamic_partition",
    "list_targets",
    "min_entropy",
    "oracle_min_partitions",
    "register_target",
    "run_campaign",
    "verify_ground_truth",
]
