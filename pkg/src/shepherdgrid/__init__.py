"""Deterministic 3D pursuit-evasion simulation and experiment harness.

A four-member interceptor pack runs a phased coordination strategy (chase,
follow, form, engage) against an evasive target; an uncoordinated
predictive-pursuit baseline provides the comparison. The harness reproduces
interception-rate, time-to-intercept, communication-degradation and
scalability experiments with seeded, bit-reproducible results.
"""
from .engine import Scenario, TrialResult, run_trial
from .harness import BatchConfig, batch_stats, run_batch
from .pack_coordination import PackPhase, PackState, StrategyParams

__all__ = [
    "BatchConfig",
    "PackPhase",
    "PackState",
    "Scenario",
    "StrategyParams",
    "TrialResult",
    "batch_stats",
    "run_batch",
    "run_trial",
]

__version__ = "0.1.0"
