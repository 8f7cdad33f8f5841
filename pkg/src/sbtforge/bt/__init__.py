"""Behavior trees with SPARQL-backed leaves: model, RDF round-trip, tick
execution, and step debugging."""

from sbtforge.bt.load import TreeLoadError, load_tree, serialize_tree
from sbtforge.bt.model import (
    SBT,
    BehaviorTree,
    BTNode,
    NodeTrace,
    TickStatus,
    TraceEntry,
)
from sbtforge.bt.tick import (
    DebugSession,
    DebugStepError,
    GraphContext,
    TickResult,
    tick,
)

__all__ = [
    "SBT",
    "BTNode",
    "BehaviorTree",
    "DebugSession",
    "DebugStepError",
    "GraphContext",
    "NodeTrace",
    "TickResult",
    "TickStatus",
    "TraceEntry",
    "TreeLoadError",
    "load_tree",
    "serialize_tree",
    "tick",
]
