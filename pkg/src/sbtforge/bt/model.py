"""Behavior-tree data model.

Node kinds split into composites (root, sequence, priority) and leaves.
Every leaf decision is a SPARQL query against the owning agent's
knowledge base; composites only combine child statuses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from sbtforge.rdf.sparql import QueryForm
from sbtforge.rdf.terms import Graph, Term, iri

SBT = "http://sbtforge.org/vocab/sbt#"

COMPOSITE_KINDS = ("root", "sequence", "priority")
LEAF_KINDS = ("condition", "update", "goalProducer", "action", "breakpoint")
NODE_KINDS = COMPOSITE_KINDS + LEAF_KINDS

# rdf:type class per node kind (class names are capitalized kind names)
KIND_CLASS = {kind: iri(SBT + kind[0].upper() + kind[1:]) for kind in NODE_KINDS}
CLASS_KIND = {term: kind for kind, term in KIND_CLASS.items()}

HAS_CHILDREN = iri(SBT + "hasChildren")
ASK_QUERY = iri(SBT + "askQuery")
UPDATE_QUERY = iri(SBT + "updateQuery")
CONSTRUCT_QUERY = iri(SBT + "constructQuery")
GOAL = iri(SBT + "goal")
ACTION = iri(SBT + "action")
LABEL = iri(SBT + "label")


class TickStatus(enum.Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    RUNNING = "running"

    def __str__(self) -> str:
        return self.value


@dataclass
class BTNode:
    uri: Term
    kind: str
    label: str = ""
    children: list["BTNode"] = field(default_factory=list)
    ask_query: Optional[QueryForm] = None
    update_query: Optional[QueryForm] = None
    construct_query: Optional[QueryForm] = None
    goal_uri: Optional[Term] = None
    action_uri: Optional[Term] = None

    @property
    def is_composite(self) -> bool:
        return self.kind in COMPOSITE_KINDS

    def walk(self):
        """Pre-order traversal."""
        yield self
        for child in self.children:
            yield from child.walk()

    def validate(self) -> None:
        if self.kind not in NODE_KINDS:
            raise ValueError(f"{self.uri.value}: unknown node kind {self.kind!r}")
        if self.kind == "root" and len(self.children) != 1:
            raise ValueError(f"{self.uri.value}: root needs exactly one child")
        if self.kind in ("sequence", "priority") and not self.children:
            raise ValueError(f"{self.uri.value}: {self.kind} needs at least one child")
        if not self.is_composite and self.children:
            raise ValueError(f"{self.uri.value}: {self.kind} leaf cannot have children")
        if self.kind == "condition" and (self.ask_query is None or self.ask_query.kind != "ask"):
            raise ValueError(f"{self.uri.value}: condition requires an ASK query")
        if self.kind == "update" and (self.update_query is None or not self.update_query.is_update):
            raise ValueError(f"{self.uri.value}: update requires an update query")
        if self.kind == "goalProducer":
            if self.construct_query is None or self.construct_query.kind != "construct":
                raise ValueError(f"{self.uri.value}: goalProducer requires a CONSTRUCT template")
            if self.goal_uri is None:
                raise ValueError(f"{self.uri.value}: goalProducer requires a goal URI")
        if self.kind == "action" and self.action_uri is None:
            raise ValueError(f"{self.uri.value}: action requires an action URI")


@dataclass
class BehaviorTree:
    root_node: BTNode
    name: str = ""
    source_graph: Optional[Graph] = None

    def nodes(self) -> list[BTNode]:
        return list(self.root_node.walk())

    def node_by_uri(self, uri: Term) -> Optional[BTNode]:
        for n in self.root_node.walk():
            if n.uri == uri:
                return n
        return None

    def validate(self) -> None:
        seen: set[Term] = set()
        for n in self.root_node.walk():
            if n.uri in seen:
                raise ValueError(f"duplicate node URI {n.uri.value}")
            seen.add(n.uri)
            n.validate()
        if self.root_node.kind != "root":
            raise ValueError("top node must have kind 'root'")


@dataclass
class TraceEntry:
    node_uri: Term
    status: TickStatus
    timestamp: float
    kind: str = ""
    label: str = ""
    error: str = ""

    def as_dict(self) -> dict:
        out = {
            "node": self.node_uri.value,
            "status": self.status.value,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "label": self.label,
        }
        if self.error:
            out["error"] = self.error
        return out


NodeTrace = list  # list[TraceEntry]; ordered by execution
