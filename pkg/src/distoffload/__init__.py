"""Call-graph offloading simulator: chain extraction, multi-VM scheduling,
crash/resend accounting and mobile/cloud energy."""

from distoffload.callgraph import (
    CallGraph,
    Chain,
    ChainDecomposition,
    MethodNode,
    Parallel,
    Serial,
    extract_chains,
    independent,
    validate_graph,
)
from distoffload.engine import (
    CrashEvent,
    NetworkSpec,
    OffloadPlan,
    SimReport,
    VmSpec,
    build_plan,
    improvement_percent,
    max_resend,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "CallGraph",
    "Chain",
    "ChainDecomposition",
    "CrashEvent",
    "MethodNode",
    "NetworkSpec",
    "OffloadPlan",
    "Parallel",
    "Serial",
    "SimReport",
    "VmSpec",
    "build_plan",
    "extract_chains",
    "improvement_percent",
    "independent",
    "max_resend",
    "simulate",
    "validate_graph",
]
