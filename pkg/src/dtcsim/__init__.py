"""Event-driven simulator for in-network TCP segment caching on a lossy chain."""

from .harness import (
    Aggregate,
    ChainTopology,
    RunMetrics,
    RunRecord,
    Scenario,
    aggregate,
    build_chain,
    reduction_factor,
    run,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregate",
    "ChainTopology",
    "RunMetrics",
    "RunRecord",
    "Scenario",
    "aggregate",
    "build_chain",
    "reduction_factor",
    "run",
    "sweep",
]
