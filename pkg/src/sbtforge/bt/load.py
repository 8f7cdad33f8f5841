"""RDF (de)serialization of behavior trees.

Trees live in graphs under the sbt: vocabulary: each node is typed with
its kind class, queries are string literals, and composite children hang
off an rdf:first/rdf:rest list so order survives the triple set.
Serialization emits skolem IRIs for list cells — never blank nodes — so
output is deterministic and diffable.
"""

from __future__ import annotations

from typing import Optional

from sbtforge.bt.model import (
    ACTION,
    ASK_QUERY,
    CLASS_KIND,
    CONSTRUCT_QUERY,
    GOAL,
    HAS_CHILDREN,
    KIND_CLASS,
    LABEL,
    SBT,
    UPDATE_QUERY,
    BehaviorTree,
    BTNode,
)
from sbtforge.rdf.sparql import SparqlParseError, format_query, parse_query
from sbtforge.rdf.terms import (
    BUILTIN_PREFIXES,
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    Graph,
    Term,
    iri,
    literal,
)


class TreeLoadError(ValueError):
    """Structural or query problem in a tree graph; names the node URI."""

    def __init__(self, node: Optional[Term], message: str):
        self.node = node
        where = f"{node.value}: " if node is not None else ""
        super().__init__(f"{where}{message}")


def _node_kind(graph: Graph, node: Term) -> str:
    for cls in graph.objects(node, RDF_TYPE):
        kind = CLASS_KIND.get(cls)
        if kind:
            return kind
    raise TreeLoadError(node, "no sbt: node class found")


def _string_property(graph: Graph, node: Term, prop: Term) -> Optional[str]:
    value = graph.value(node, prop, None)
    if value is None:
        return None
    if not value.is_literal:
        raise TreeLoadError(node, f"{prop.value} must be a string literal")
    return value.value


def _parse_node_query(graph: Graph, node: Term, prop: Term, description: str):
    text = _string_property(graph, node, prop)
    if text is None:
        raise TreeLoadError(node, f"missing {description}")
    try:
        return parse_query(text)
    except SparqlParseError as exc:
        raise TreeLoadError(node, f"bad {description}: {exc}") from exc


def _load_node(graph: Graph, uri: Term, ancestry: tuple) -> BTNode:
    if uri in ancestry:
        raise TreeLoadError(uri, "node is its own descendant (cycle)")
    kind = _node_kind(graph, uri)
    node = BTNode(uri=uri, kind=kind, label=_string_property(graph, uri, LABEL) or "")
    if kind in ("root", "sequence", "priority"):
        head = graph.value(uri, HAS_CHILDREN, None)
        if head is None:
            raise TreeLoadError(uri, "composite node without sbt:hasChildren list")
        try:
            child_uris = graph.rdf_list(head)
        except ValueError as exc:
            raise TreeLoadError(uri, str(exc)) from exc
        node.children = [_load_node(graph, c, ancestry + (uri,)) for c in child_uris]
    elif kind == "condition":
        node.ask_query = _parse_node_query(graph, uri, ASK_QUERY, "sbt:askQuery")
    elif kind == "update":
        node.update_query = _parse_node_query(graph, uri, UPDATE_QUERY, "sbt:updateQuery")
    elif kind == "goalProducer":
        node.construct_query = _parse_node_query(graph, uri, CONSTRUCT_QUERY, "sbt:constructQuery")
        node.goal_uri = graph.value(uri, GOAL, None)
        if node.goal_uri is None:
            raise TreeLoadError(uri, "goalProducer without sbt:goal")
    elif kind == "action":
        node.action_uri = graph.value(uri, ACTION, None)
        if node.action_uri is None:
            raise TreeLoadError(uri, "action node without sbt:action")
    try:
        node.validate()
    except ValueError as exc:
        raise TreeLoadError(uri, str(exc)) from exc
    return node


def load_tree(graph: Graph, root_uri: Term) -> BehaviorTree:
    root = _load_node(graph, root_uri, ())
    if root.kind != "root":
        raise TreeLoadError(root_uri, f"expected a root node, found {root.kind}")
    tree = BehaviorTree(
        root_node=root,
        name=root.label or root_uri.value.rsplit("#", 1)[-1].rsplit("/", 1)[-1],
        source_graph=graph,
    )
    try:
        tree.validate()
    except ValueError as exc:
        raise TreeLoadError(None, str(exc)) from exc
    return tree


def _list_cell(parent: Term, index: int) -> Term:
    return iri(f"{parent.value}-list-{index}")


def serialize_tree(tree: BehaviorTree) -> Graph:
    tree.validate()
    g = Graph(prefixes=dict(BUILTIN_PREFIXES))
    g.bind("sbt", SBT)
    for node in tree.root_node.walk():
        g.add(node.uri, RDF_TYPE, KIND_CLASS[node.kind])
        if node.label:
            g.add(node.uri, LABEL, literal(node.label))
        if node.is_composite:
            cells = [_list_cell(node.uri, i) for i in range(len(node.children))]
            g.add(node.uri, HAS_CHILDREN, cells[0])
            for i, (cell, child) in enumerate(zip(cells, node.children)):
                g.add(cell, RDF_FIRST, child.uri)
                g.add(cell, RDF_REST, cells[i + 1] if i + 1 < len(cells) else RDF_NIL)
        if node.ask_query is not None:
            g.add(node.uri, ASK_QUERY, literal(format_query(node.ask_query)))
        if node.update_query is not None:
            g.add(node.uri, UPDATE_QUERY, literal(format_query(node.update_query)))
        if node.construct_query is not None:
            g.add(node.uri, CONSTRUCT_QUERY, literal(format_query(node.construct_query)))
        if node.goal_uri is not None:
            g.add(node.uri, GOAL, node.goal_uri)
        if node.action_uri is not None:
            g.add(node.uri, ACTION, node.action_uri)
    return g
